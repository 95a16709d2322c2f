import { ApiError, ChatApi } from './api.js';
import { SessionStore, StorageLike } from './store.js';
import { botEntryFromReply, entryFromHistory, failureEntry, humanEntry } from './transcript.js';
import type { TranscriptEntry } from './types.js';
import { buildSkeleton, renderTranscript, UiHandles } from './ui.js';

export interface AppDeps {
  api: ChatApi;
  storage: StorageLike;
  doc: Document;
}

export class ChatApp {
  entries: TranscriptEntry[] = [];
  sessionId: string | null = null;
  inflight = false;
  private readonly store: SessionStore;
  private readonly ui: UiHandles;

  constructor(root: HTMLElement, private readonly deps: AppDeps) {
    this.store = new SessionStore(deps.storage);
    this.ui = buildSkeleton(root);
    this.ui.input.addEventListener('input', () => this.syncComposer());
    this.ui.newChatButton.addEventListener('click', () => this.newChat());
    (root.querySelector('.composer') as HTMLFormElement).addEventListener('submit', (event) => {
      event.preventDefault();
      void this.send(this.ui.input.value);
    });
    this.syncComposer();
  }

  private syncComposer(): void {
    this.ui.sendButton.disabled = this.inflight || this.ui.input.value.trim() === '';
    this.ui.input.disabled = this.inflight;
  }

  private render(): void {
    renderTranscript(this.deps.doc, this.ui.transcript, this.entries, (draft) => void this.retry(draft));
    this.syncComposer();
  }

  async rehydrate(): Promise<void> {
    const saved = this.store.load();
    if (!saved) return;
    this.sessionId = saved;
    try {
      const session = await this.deps.api.fetchSession(saved);
      this.entries = session.history.map(entryFromHistory);
    } catch {
      // unreachable server or wiped session: start clean, no error dialog
      this.entries = [];
    }
    this.render();
  }

  async send(raw: string): Promise<void> {
    const message = raw.trim();
    if (!message || this.inflight) return;
    this.inflight = true;
    this.entries.push(humanEntry(message));
    this.render();
    try {
      const reply = await this.deps.api.sendChat(message, this.sessionId);
      this.sessionId = reply.session_id;
      this.store.save(reply.session_id);
      this.entries.push(botEntryFromReply(reply));
      this.ui.input.value = '';
    } catch (err) {
      // drop the optimistic human turn, surface the failure inline, and
      // put the draft back so nothing typed is lost
      this.entries.pop();
      const detail = err instanceof ApiError ? err.message : 'unexpected error';
      this.entries.push(failureEntry(message, detail));
      this.ui.input.value = message;
    } finally {
      this.inflight = false;
      this.render();
    }
  }

  private async retry(draft: string): Promise<void> {
    this.entries = this.entries.filter((entry) => !entry.failed);
    this.render();
    await this.send(draft);
  }

  newChat(): void {
    this.store.clear();
    this.sessionId = null;
    this.entries = [];
    this.ui.input.value = '';
    this.render();
  }
}

export function initApp(root: HTMLElement, deps: AppDeps): ChatApp {
  return new ChatApp(root, deps);
}
