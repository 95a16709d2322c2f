// Session id persistence behind an injectable Storage.

const KEY = 'emotichat.session_id';

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class SessionStore {
  constructor(private readonly storage: StorageLike) {}

  load(): string | null {
    return this.storage.getItem(KEY);
  }

  save(sessionId: string): void {
    this.storage.setItem(KEY, sessionId);
  }

  clear(): void {
    this.storage.removeItem(KEY);
  }
}
