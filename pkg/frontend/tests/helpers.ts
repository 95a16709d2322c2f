import { ChatApi } from '../src/api.js';
import { initApp, ChatApp } from '../src/app.js';
import type { StorageLike } from '../src/store.js';
import type { ChatReply, SessionHistoryEntry } from '../src/types.js';

export class MemoryStorage implements StorageLike {
  private data = new Map<string, string>();
  getItem(key: string): string | null {
    return this.data.has(key) ? (this.data.get(key) as string) : null;
  }
  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
  removeItem(key: string): void {
    this.data.delete(key);
  }
}

export interface FakeServer {
  fetch: (input: string, init?: RequestInit) => Promise<Response>;
  calls: { url: string; body?: unknown }[];
  sessions: Map<string, SessionHistoryEntry[]>;
  failNext: { value: boolean };
  reply: (message: string) => Partial<ChatReply>;
}

// In-memory stand-in for the chat service that mirrors its wire formats.
export function makeFakeServer(replyFor: (message: string) => Partial<ChatReply> = () => ({})): FakeServer {
  const sessions = new Map<string, SessionHistoryEntry[]>();
  const calls: { url: string; body?: unknown }[] = [];
  const failNext = { value: false };
  let counter = 0;

  async function fakeFetch(input: string, init?: RequestInit): Promise<Response> {
    if (failNext.value) {
      failNext.value = false;
      return new Response('boom', { status: 500 });
    }
    if (input.endsWith('/api/chat') && init?.method === 'POST') {
      const body = JSON.parse(String(init.body));
      calls.push({ url: input, body });
      const sessionId = body.session_id ?? `s${++counter}`;
      if (!sessions.has(sessionId)) sessions.set(sessionId, []);
      const history = sessions.get(sessionId)!;
      const defaults: ChatReply = {
        session_id: sessionId,
        reply: `echo: ${body.message}`,
        emoji: '😀',
        emotion: 'joy',
        similarity: 0.72,
        probability: 0.41,
      };
      const reply = { ...defaults, ...replyFor(body.message), session_id: sessionId };
      history.push({
        author: 'human', text: body.message, display_text: body.message, timestamp: history.length,
      });
      history.push({
        author: 'bot',
        text: reply.reply,
        display_text: reply.emoji ? `${reply.reply} ${reply.emoji}` : reply.reply,
        timestamp: history.length,
        emoji: reply.emoji,
        emotion: reply.emotion,
        similarity: reply.similarity,
        probability: reply.probability,
      });
      return new Response(JSON.stringify(reply), { status: 200 });
    }
    const sessionMatch = input.match(/\/api\/session\/(.+)$/);
    if (sessionMatch) {
      calls.push({ url: input });
      const sessionId = decodeURIComponent(sessionMatch[1]);
      return new Response(
        JSON.stringify({ session_id: sessionId, history: sessions.get(sessionId) ?? [] }),
        { status: 200 },
      );
    }
    return new Response('not found', { status: 404 });
  }

  return { fetch: fakeFetch, calls, sessions, failNext, reply: replyFor };
}

export function mountApp(server: FakeServer, storage: StorageLike = new MemoryStorage()) {
  const root = document.createElement('div');
  document.body.appendChild(root);
  const app = initApp(root, {
    api: new ChatApi('', server.fetch),
    storage,
    doc: document,
  });
  return { app, root, storage };
}

export function bubbles(root: HTMLElement): HTMLElement[] {
  return Array.from(root.querySelectorAll('.message'));
}

export async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

export type { ChatApp };
