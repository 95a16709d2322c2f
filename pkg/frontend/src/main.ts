import { ChatApi } from './api.js';
import { initApp } from './app.js';

const root = document.getElementById('app');
if (!root) {
  throw new Error('missing #app container');
}
const app = initApp(root, {
  api: new ChatApi(''),
  storage: window.localStorage,
  doc: document,
});
void app.rehydrate();
