// Entry point: reads the API base from a meta tag, restores the view state
// from the URL query string, and writes the encoded state back to the URL
// on every change so any view can be bookmarked or shared.

import { ApiClient } from './api.js';
import { Dashboard } from './app.js';
import { decodeViewState, encodeViewState } from './state.js';

function apiBase(): string {
  const tag = document.querySelector<HTMLMetaElement>('meta[name="api-base"]');
  return tag && tag.content ? tag.content : window.location.origin;
}

function boot(): void {
  const root = document.querySelector<HTMLElement>('#dashboard');
  if (!root) {
    return;
  }
  const client = new ApiClient(apiBase());
  const dashboard = new Dashboard(root, client, decodeViewState(window.location.search), {
    onStateChange: (state) => {
      const search = encodeViewState(state);
      const target = search ? `${window.location.pathname}?${search}` : window.location.pathname;
      if (`${window.location.pathname}${window.location.search}` !== target) {
        history.replaceState(null, '', target);
      }
    },
  });
  window.addEventListener('popstate', () => {
    dashboard.replaceState(decodeViewState(window.location.search));
  });
  void dashboard.start();
}

boot();
