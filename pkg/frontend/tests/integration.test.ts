// Live integration: build a copy-corpus bundle, serve it with the real
// backend, and drive the client against it over HTTP.

import { spawn, execFileSync, ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync, rmSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

// vitest injects __dirname into test transforms; import.meta.url is not
// usable here because happy-dom rewrites it to the page origin
const HERE = __dirname;

import { ChatApi } from '../src/api.js';
import { initApp } from '../src/app.js';
import { MemoryStorage, bubbles } from './helpers.js';

const PORT = 8931;
const BASE = `http://127.0.0.1:${PORT}`;

let workdir: string;
let server: ChildProcess | undefined;
let probes: { message: string; reply: string }[];

async function waitForHealth(timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/api/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error('chat service never became healthy');
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), 'emotichat-webui-'));
  execFileSync('python3', [join(HERE, '..', 'scripts', 'make_demo_bundle.py'), workdir], {
    stdio: ['ignore', 'ignore', 'inherit'],
    timeout: 180_000,
  });
  probes = JSON.parse(readFileSync(join(workdir, 'probes.json'), 'utf-8'));
  server = spawn('python3', [
    '-m', 'emotichat.cli', 'serve',
    '--config', join(workdir, 'config.json'),
    '--host', '127.0.0.1', '--port', String(PORT),
  ], { stdio: 'ignore' });
  await waitForHealth();
}, 240_000);

afterAll(() => {
  server?.kill();
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

function mountLiveApp(storage: MemoryStorage) {
  const root = document.createElement('div');
  document.body.appendChild(root);
  const app = initApp(root, {
    api: new ChatApi(BASE, (input, init) => fetch(input, init)),
    storage,
    doc: document,
  });
  return { app, root };
}

describe('web client against a served copy-corpus bundle', () => {
  it('renders the gold reply with inspector fields, restores on reload, no stray emoji', async () => {
    const storage = new MemoryStorage();
    const { app, root } = mountLiveApp(storage);
    const probe = probes[0];

    await app.send(probe.message);
    let rows = bubbles(root);
    expect(rows).toHaveLength(2);
    const bot = rows[1];
    expect(bot.querySelector('.text')?.textContent).toBe(probe.reply);
    const inspector = bot.querySelector('.inspector')?.textContent ?? '';
    expect(inspector).toMatch(/emotion \S+/);
    expect(inspector).toMatch(/similarity -?\d/);
    expect(inspector).toMatch(/probability \d/);
    // synthetic tokens are outside the word-vector table, so the server
    // reports similarity -1 and attaches no emoji
    expect(bot.querySelector('.emoji')).toBeNull();
    expect(inspector).toContain('below threshold');

    const transcriptBefore = rows.map((row) => row.textContent);
    const sessionId = app.sessionId;
    expect(sessionId).toBeTruthy();

    // reload: fresh app instance, same storage
    document.body.innerHTML = '';
    const reloaded = mountLiveApp(storage);
    await reloaded.app.rehydrate();
    rows = bubbles(reloaded.root);
    expect(rows.map((row) => row.textContent)).toEqual(transcriptBefore);
    expect(reloaded.app.sessionId).toBe(sessionId);
  }, 60_000);

  it('answers every verified probe with its gold response', async () => {
    for (const probe of probes) {
      const storage = new MemoryStorage();
      const { app, root } = mountLiveApp(storage);
      await app.send(probe.message);
      const bot = bubbles(root)[1];
      expect(bot.querySelector('.text')?.textContent).toBe(probe.reply);
      document.body.innerHTML = '';
    }
  }, 60_000);

  it('health endpoint reports the bundle version', async () => {
    const response = await fetch(`${BASE}/api/health`);
    const body = await response.json();
    expect(body.status).toBe('ok');
    expect(body.bundle_version).toMatch(/^[0-9a-f]{16}$/);
  });
});
