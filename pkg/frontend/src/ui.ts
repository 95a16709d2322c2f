import type { TranscriptEntry } from './types.js';

// DOM construction and redraw. Bot bubbles render the server's reply
// text and emoji as two separate spans; the inspector line shows the
// emotion, cosine similarity, and retrieval probability verbatim.

export interface UiHandles {
  transcript: HTMLElement;
  input: HTMLInputElement;
  sendButton: HTMLButtonElement;
  newChatButton: HTMLButtonElement;
  status: HTMLElement;
}

export function buildSkeleton(root: HTMLElement): UiHandles {
  root.innerHTML = `
    <header class="topbar">
      <h1>emotichat</h1>
      <button type="button" class="new-chat">new chat</button>
    </header>
    <main class="transcript" aria-live="polite"></main>
    <form class="composer">
      <input type="text" class="draft" placeholder="say something…" autocomplete="off" />
      <button type="submit" class="send">send</button>
    </form>
    <footer class="status"></footer>
  `;
  return {
    transcript: root.querySelector('.transcript') as HTMLElement,
    input: root.querySelector('.draft') as HTMLInputElement,
    sendButton: root.querySelector('.send') as HTMLButtonElement,
    newChatButton: root.querySelector('.new-chat') as HTMLButtonElement,
    status: root.querySelector('.status') as HTMLElement,
  };
}

function inspectorText(entry: TranscriptEntry): string {
  const similarity = entry.similarity === null ? '–' : entry.similarity.toFixed(3);
  const probability = entry.probability === null ? '–' : entry.probability.toFixed(3);
  const emojiNote = entry.emoji === null ? ' · no emoji (below threshold)' : '';
  return `emotion ${entry.emotion ?? '–'} · similarity ${similarity} · probability ${probability}${emojiNote}`;
}

export function renderEntry(doc: Document, entry: TranscriptEntry, onRetry?: (draft: string) => void): HTMLElement {
  const row = doc.createElement('div');
  row.className = `message ${entry.author}${entry.failed ? ' failed' : ''}`;

  const bubble = doc.createElement('div');
  bubble.className = 'bubble';
  const text = doc.createElement('span');
  text.className = 'text';
  text.textContent = entry.text;
  bubble.appendChild(text);
  if (entry.emoji) {
    const emoji = doc.createElement('span');
    emoji.className = 'emoji';
    emoji.textContent = entry.emoji;
    bubble.appendChild(emoji);
  }
  row.appendChild(bubble);

  if (entry.failed && entry.failedDraft !== undefined && onRetry) {
    const retry = doc.createElement('button');
    retry.type = 'button';
    retry.className = 'retry';
    retry.textContent = 'retry';
    const draft = entry.failedDraft;
    retry.addEventListener('click', () => onRetry(draft));
    row.appendChild(retry);
  } else if (entry.author === 'bot' && !entry.failed) {
    const inspector = doc.createElement('div');
    inspector.className = 'inspector';
    inspector.textContent = inspectorText(entry);
    row.appendChild(inspector);
  }
  return row;
}

export function renderTranscript(
  doc: Document,
  container: HTMLElement,
  entries: TranscriptEntry[],
  onRetry?: (draft: string) => void,
): void {
  container.innerHTML = '';
  for (const entry of entries) {
    container.appendChild(renderEntry(doc, entry, onRetry));
  }
  container.scrollTop = container.scrollHeight;
}
