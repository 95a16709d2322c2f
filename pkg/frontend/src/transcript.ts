import type { ChatReply, SessionHistoryEntry, TranscriptEntry } from './types.js';

// Pure transcript-state helpers. Every bot entry's text and emoji come
// straight from the server; nothing is recomposed here.

export function humanEntry(text: string, timestamp = Date.now()): TranscriptEntry {
  return {
    author: 'human', text, emoji: null,
    emotion: null, similarity: null, probability: null, timestamp,
  };
}

export function botEntryFromReply(reply: ChatReply, timestamp = Date.now()): TranscriptEntry {
  return {
    author: 'bot',
    text: reply.reply,
    emoji: reply.emoji ?? null,
    emotion: reply.emotion,
    similarity: reply.similarity,
    probability: reply.probability,
    timestamp,
  };
}

export function entryFromHistory(entry: SessionHistoryEntry): TranscriptEntry {
  return {
    author: entry.author,
    text: entry.text,
    emoji: entry.emoji ?? null,
    emotion: entry.emotion ?? null,
    similarity: entry.similarity ?? null,
    probability: entry.probability ?? null,
    timestamp: entry.timestamp,
  };
}

export function failureEntry(draft: string, detail: string, timestamp = Date.now()): TranscriptEntry {
  return {
    author: 'bot',
    text: `could not send: ${detail}`,
    emoji: null, emotion: null, similarity: null, probability: null,
    timestamp,
    failed: true,
    failedDraft: draft,
  };
}
