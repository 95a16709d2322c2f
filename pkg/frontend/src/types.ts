// Wire formats of the chat service API, mirrored verbatim.

export interface ChatReply {
  session_id: string;
  reply: string;
  emoji: string | null;
  emotion: string;
  similarity: number;
  probability: number;
}

export interface SessionHistoryEntry {
  author: 'human' | 'bot';
  text: string;
  display_text: string;
  timestamp: number;
  emoji?: string | null;
  emotion?: string | null;
  similarity?: number | null;
  probability?: number | null;
}

export interface SessionHistory {
  session_id: string;
  history: SessionHistoryEntry[];
}

// One transcript row. Bot entries carry the inspector fields; human and
// failure entries do not.
export interface TranscriptEntry {
  author: 'human' | 'bot';
  text: string;
  emoji: string | null;
  emotion: string | null;
  similarity: number | null;
  probability: number | null;
  timestamp: number;
  failed?: boolean;
  failedDraft?: string;
}
