/**
 * One annotator's working session: conformance gate, batch paging, a draft
 * editor per record, client-side validation, submission, and progress.
 *
 * The session never submits a draft its own parser rejects; since startup
 * proved the grammar matches the server's conformance vectors, anything we
 * send will be accepted (the server still revalidates).
 */

import { ApiClient, type ProgressDoc, type RecordDoc } from "./api";
import { DraftEditor } from "./editor";
import {
  parse,
  runConformance,
  type ParseResult,
  type TaxonomyDoc,
} from "./grammar";

export const CLIENT_VERSION = "annotator-ui/0.1.0";

/** Hotkey pool assigned to categories in taxonomy order (with Alt held). */
export const HOTKEY_POOL = "1234567890qwertyuiopasdfghjkl".split("");

export type SessionPhase = "idle" | "ready" | "done";

export interface ValidationView {
  ok: boolean;
  message?: string;
  charOffset?: number;
}

export class GrammarMismatch extends Error {
  constructor(readonly failures: ReturnType<typeof runConformance>) {
    super(`client grammar diverges from server on ${failures.length} vector(s)`);
  }
}

export class AnnotationSession {
  taxonomy!: TaxonomyDoc;
  phase: SessionPhase = "idle";
  batch: RecordDoc[] = [];
  index = 0;
  submitted = 0;
  private editors = new Map<string, DraftEditor>();

  constructor(
    readonly annotator: string,
    private readonly api: ApiClient,
    private readonly batchSize = 10,
  ) {}

  /** Fetch the taxonomy, prove grammar parity, and pull the first batch. */
  async start(): Promise<void> {
    this.taxonomy = await this.api.taxonomy();
    const failures = runConformance(this.taxonomy);
    if (failures.length > 0) throw new GrammarMismatch(failures);
    await this.loadBatch();
  }

  async loadBatch(): Promise<void> {
    this.batch = await this.api.batch(this.annotator, this.batchSize);
    this.index = 0;
    this.editors.clear();
    this.phase = this.batch.length === 0 ? "done" : "ready";
  }

  get current(): RecordDoc | undefined {
    return this.batch[this.index];
  }

  /** The draft editor for the current record, seeded with its transcript. */
  get editor(): DraftEditor {
    const rec = this.current;
    if (!rec) throw new Error("no current record");
    let editor = this.editors.get(rec.id);
    if (!editor) {
      editor = new DraftEditor(rec.transcript, this.taxonomy);
      this.editors.set(rec.id, editor);
    }
    return editor;
  }

  hotkeyFor(categoryIndex: number): string | undefined {
    return HOTKEY_POOL[categoryIndex];
  }

  categoryForHotkey(key: string): number {
    return HOTKEY_POOL.indexOf(key);
  }

  insertByHotkey(key: string): boolean {
    const idx = this.categoryForHotkey(key);
    const cat = idx >= 0 ? this.taxonomy.categories[idx] : undefined;
    if (!cat) return false;
    this.editor.insertTag(cat.surface);
    return true;
  }

  validate(): ValidationView {
    const result: ParseResult = parse(this.editor.text, this.taxonomy);
    if (result.ok) return { ok: true };
    const what =
      result.error === "unknown-tag"
        ? `unknown tag ${result.surface ?? ""}`
        : "unbalanced bracket";
    return { ok: false, message: what, charOffset: result.charOffset };
  }

  get submittable(): boolean {
    return this.phase === "ready" && this.validate().ok;
  }

  audioUrl(): string {
    const rec = this.current;
    if (!rec) throw new Error("no current record");
    return this.api.audioUrl(rec.id);
  }

  /** Submit the current draft and advance; refuses unparseable drafts. */
  async submitCurrent(): Promise<void> {
    const rec = this.current;
    if (!rec) throw new Error("no current record");
    if (!this.validate().ok) {
      throw new Error("draft does not parse; fix it before submitting");
    }
    await this.api.submit(rec.id, this.annotator, this.editor.text, CLIENT_VERSION);
    this.submitted += 1;
    this.editors.delete(rec.id);
    this.batch.splice(this.index, 1);
    if (this.index >= this.batch.length) this.index = 0;
    if (this.batch.length === 0) await this.loadBatch();
  }

  skip(): void {
    if (this.batch.length > 1) this.index = (this.index + 1) % this.batch.length;
  }

  progress(): Promise<ProgressDoc> {
    return this.api.progress();
  }
}
