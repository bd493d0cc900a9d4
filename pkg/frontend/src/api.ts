/** Typed client for the annotation service endpoints. */

import type { TaxonomyDoc } from "./grammar";

export interface RecordDoc {
  id: string;
  audio_path: string;
  duration_s: number;
  speaker: string;
  source: string;
  transcript: string;
  provenance: string;
  lang: string;
  cross_annotators?: string[];
}

export interface ProgressDoc {
  records: number;
  annotated: number;
  submissions: number;
  per_annotator: Record<string, number>;
}

export interface SubmissionAck {
  status: string;
  record_id: string;
  annotator: string;
  transcript: string;
  submitted_at: string;
}

export interface RejectionDetail {
  error: string;
  surface?: string;
  byte_offset?: number;
  record_id?: string;
}

export class SubmissionRejected extends Error {
  constructor(readonly detail: RejectionDetail) {
    super(`submission rejected: ${detail.error}`);
  }
}

export interface Fetcher {
  (input: string, init?: RequestInit): Promise<Response>;
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetcher: Fetcher = (input, init) => fetch(input, init),
  ) {}

  async taxonomy(): Promise<TaxonomyDoc> {
    const resp = await this.fetcher(`${this.base}/taxonomy`);
    if (!resp.ok) throw new Error(`GET /taxonomy failed: ${resp.status}`);
    return (await resp.json()) as TaxonomyDoc;
  }

  async batch(annotator: string, n: number): Promise<RecordDoc[]> {
    const params = new URLSearchParams({ annotator, n: String(n) });
    const resp = await this.fetcher(`${this.base}/batch?${params}`);
    if (!resp.ok) throw new Error(`GET /batch failed: ${resp.status}`);
    const doc = (await resp.json()) as { records: RecordDoc[] };
    return doc.records;
  }

  audioUrl(recordId: string): string {
    return `${this.base}/audio/${encodeURIComponent(recordId)}`;
  }

  async submit(
    recordId: string,
    annotator: string,
    transcript: string,
    clientVersion: string,
  ): Promise<SubmissionAck> {
    const resp = await this.fetcher(`${this.base}/annotation`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        record_id: recordId,
        annotator,
        transcript,
        client_version: clientVersion,
      }),
    });
    if (resp.status === 404 || resp.status === 422 || resp.status === 400) {
      const body = (await resp.json()) as { detail: RejectionDetail };
      throw new SubmissionRejected(body.detail);
    }
    if (!resp.ok) throw new Error(`POST /annotation failed: ${resp.status}`);
    return (await resp.json()) as SubmissionAck;
  }

  async progress(): Promise<ProgressDoc> {
    const resp = await this.fetcher(`${this.base}/progress`);
    if (!resp.ok) throw new Error(`GET /progress failed: ${resp.status}`);
    return (await resp.json()) as ProgressDoc;
  }
}
