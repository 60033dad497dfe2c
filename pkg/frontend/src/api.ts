/** Thin client for the f2m service JSON API. */

import type { EditCommand } from './commands';

export interface DocumentState {
  document_id: string;
  code: string;
  revision: number;
}

export interface MutationResult {
  code: string;
  revision: number;
  warning?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parseOrThrow<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ServiceClient {
  constructor(readonly baseUrl: string = '') {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<boolean> {
    try {
      const resp = await fetch(this.url('/api/health'));
      return resp.ok;
    } catch {
      return false;
    }
  }

  async models(): Promise<Array<{ id: string; provider: string; configured: boolean }>> {
    const body = await parseOrThrow<{
      models: Array<{ id: string; provider: string; configured: boolean }>;
    }>(await fetch(this.url('/api/models')));
    return body.models;
  }

  async convert(image: Blob, filename: string, model: string): Promise<DocumentState> {
    const form = new FormData();
    form.append('image', image, filename);
    form.append('model', model);
    return parseOrThrow(await fetch(this.url('/api/convert'), { method: 'POST', body: form }));
  }

  async edit(documentId: string, command: EditCommand): Promise<MutationResult> {
    return parseOrThrow(
      await fetch(this.url('/api/edit'), {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ document_id: documentId, command }),
      }),
    );
  }

  async refine(documentId: string, instruction: string, model: string): Promise<MutationResult> {
    return parseOrThrow(
      await fetch(this.url('/api/refine'), {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ document_id: documentId, instruction, model }),
      }),
    );
  }

  /** Exact current code bytes of the document, as served for .mmd download. */
  async exportMmd(documentId: string): Promise<string> {
    const resp = await fetch(this.url(`/api/export/${documentId}?format=mmd`));
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return resp.text();
  }
}
