/** Thin typed wrappers over the two server endpoints. */

import type {
  DocumentPayload,
  SlicePayload,
  SliceRequest,
  SourceErrorEntry,
} from "./types.js";

export class RequestRejected extends Error {
  constructor(message: string) {
    super(message);
  }
}

export class SourceRejected extends Error {
  constructor(public entries: SourceErrorEntry[]) {
    super(entries.map((e) => `${e.start.line}:${e.start.column}: ${e.message}`).join("\n"));
  }
}

export async function fetchDocument(base: string): Promise<DocumentPayload> {
  const reply = await fetch(`${base}/document`);
  if (!reply.ok) throw new RequestRejected(`GET /document answered ${reply.status}`);
  return (await reply.json()) as DocumentPayload;
}

export async function postSlice(
  base: string,
  request: SliceRequest,
): Promise<SlicePayload> {
  const reply = await fetch(`${base}/slice`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(request),
  });
  if (reply.status === 422) {
    const body = (await reply.json()) as { errors: SourceErrorEntry[] };
    throw new SourceRejected(body.errors);
  }
  if (!reply.ok) {
    const body = (await reply.json().catch(() => ({ error: `status ${reply.status}` }))) as {
      error?: string;
    };
    throw new RequestRejected(body.error ?? `status ${reply.status}`);
  }
  return (await reply.json()) as SlicePayload;
}
