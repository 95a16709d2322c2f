import type { ChatReply, SessionHistory } from './types.js';

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ChatApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async sendChat(message: string, sessionId: string | null): Promise<ChatReply> {
    const body: Record<string, string> = { message };
    if (sessionId) body.session_id = sessionId;
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/api/chat`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(`network error: ${String(err)}`);
    }
    if (!response.ok) {
      throw new ApiError(`server responded ${response.status}`, response.status);
    }
    return (await response.json()) as ChatReply;
  }

  async fetchSession(sessionId: string): Promise<SessionHistory> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/api/session/${encodeURIComponent(sessionId)}`);
    } catch (err) {
      throw new ApiError(`network error: ${String(err)}`);
    }
    if (!response.ok) {
      throw new ApiError(`server responded ${response.status}`, response.status);
    }
    return (await response.json()) as SessionHistory;
  }
}
