// Shared test support: loads the captured API responses recorded from the
// seeded backend fixture, and parses the data attributes that chart markup
// attaches to every rendered value.

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import type { Envelope } from '../src/api.js';

export interface Capture {
  path: string;
  params: { [key: string]: string };
  body: Envelope<unknown>;
}

const fixturePath = join(dirname(fileURLToPath(import.meta.url)), 'fixtures', 'payloads.json');
const captures = JSON.parse(readFileSync(fixturePath, 'utf8')) as { [name: string]: Capture };

export function capture(name: string): Capture {
  const found = captures[name];
  if (!found) {
    throw new Error(`no captured response named "${name}"`);
  }
  return found;
}

export function payloadOf<T>(name: string): T {
  return capture(name).body.data as T;
}

function unescapeAttr(text: string): string {
  return text
    .replace(/&quot;/g, '"')
    .replace(/&lt;/g, '<')
    .replace(/&gt;/g, '>')
    .replace(/&amp;/g, '&');
}

/** Label-to-value pairs read back from rendered chart markup. */
export function datumMap(markup: string, role = 'datum'): Map<string, string> {
  const map = new Map<string, string>();
  const pattern = new RegExp(`data-role="${role}" data-label="([^"]*)" data-value="([^"]*)"`, 'g');
  for (const match of markup.matchAll(pattern)) {
    map.set(unescapeAttr(match[1] as string), match[2] as string);
  }
  return map;
}
