/** Mermaid Live Editor handoff.
 *
 * The editor state rides in the URL fragment as `pako:<payload>` where
 * the payload is the JSON state, deflate-compressed and base64url-encoded
 * without padding.
 */

import { deflate, inflate } from 'pako';

const LIVE_EDITOR_BASE = 'https://mermaid.live/edit';

interface LiveEditorState {
  code: string;
  mermaid: string;
  autoSync: boolean;
  updateDiagram: boolean;
}

function toBase64Url(bytes: Uint8Array): string {
  let binary = '';
  for (const b of bytes) binary += String.fromCharCode(b);
  const base64 = typeof btoa === 'function'
    ? btoa(binary)
    : Buffer.from(bytes).toString('base64');
  return base64.replace(/\+/g, '-').replace(/\//g, '_').replace(/=+$/, '');
}

function fromBase64Url(text: string): Uint8Array {
  const base64 = text.replace(/-/g, '+').replace(/_/g, '/');
  const padded = base64 + '='.repeat((4 - (base64.length % 4)) % 4);
  if (typeof atob === 'function') {
    const binary = atob(padded);
    return Uint8Array.from(binary, (ch) => ch.charCodeAt(0));
  }
  return new Uint8Array(Buffer.from(padded, 'base64'));
}

export function encodeFragment(code: string): string {
  const state: LiveEditorState = {
    code,
    mermaid: JSON.stringify({ theme: 'default' }),
    autoSync: true,
    updateDiagram: true,
  };
  const compressed = deflate(JSON.stringify(state), { level: 9 });
  return `pako:${toBase64Url(compressed)}`;
}

/** Inverse of encodeFragment; returns the embedded code. */
export function decodeFragment(fragment: string): string {
  const payload = fragment.startsWith('pako:') ? fragment.slice(5) : fragment;
  const json = inflate(fromBase64Url(payload), { to: 'string' });
  const state = JSON.parse(json) as LiveEditorState;
  return state.code;
}

export function liveEditorUrl(code: string): string {
  return `${LIVE_EDITOR_BASE}#${encodeFragment(code)}`;
}
