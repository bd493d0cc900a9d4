/**
 * Draft state for one record: text, cursor, and an undo stack.
 *
 * Every mutation snapshots the prior state, so hotkey insertion followed by
 * undo restores the exact previous draft, cursor included. The editor also
 * knows whether the annotator changed the lexical text itself (tags aside),
 * which the UI surfaces as a badge.
 */

import { stripTags, type TaxonomyDoc } from "./grammar";

export interface DraftState {
  text: string;
  cursor: number;
}

export class DraftEditor {
  private state: DraftState;
  private undoStack: DraftState[] = [];
  private readonly seedLexical: string;

  constructor(
    seedText: string,
    private readonly taxonomy: TaxonomyDoc,
  ) {
    this.state = { text: seedText, cursor: seedText.length };
    this.seedLexical = stripTags(seedText, taxonomy);
  }

  get text(): string {
    return this.state.text;
  }

  get cursor(): number {
    return this.state.cursor;
  }

  private push(next: DraftState): void {
    this.undoStack.push({ ...this.state });
    this.state = next;
  }

  /** Insert a tag surface at the cursor (hotkey path). */
  insertTag(surface: string): void {
    const { text, cursor } = this.state;
    this.push({
      text: text.slice(0, cursor) + surface + text.slice(cursor),
      cursor: cursor + surface.length,
    });
  }

  /** Replace the whole draft (textarea input path). */
  setText(text: string, cursor: number): void {
    if (text === this.state.text && cursor === this.state.cursor) return;
    this.push({ text, cursor });
  }

  moveCursor(cursor: number): void {
    // cursor motion is not an undoable edit
    this.state = { ...this.state, cursor: clamp(cursor, 0, this.state.text.length) };
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.state = prev;
    return true;
  }

  get canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  /** True when the draft's lexical content differs from the seed's. */
  get lexicalEdited(): boolean {
    return stripTags(this.state.text, this.taxonomy) !== this.seedLexical;
  }
}

function clamp(x: number, lo: number, hi: number): number {
  return Math.max(lo, Math.min(hi, x));
}
