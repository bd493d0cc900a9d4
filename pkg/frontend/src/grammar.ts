/**
 * Client-side mirror of the server's inline-tag grammar.
 *
 * The rules must match the server byte for byte: NFC normalization,
 * whitespace dropped outside tags, brackets reserved, lexical units are
 * extended grapheme clusters, tag surfaces and aliases resolve
 * case-sensitively, aliases serialize as the canonical surface. Parity is
 * not assumed — runConformance() replays the vector set the server ships
 * with GET /taxonomy and reports any divergence.
 */

export interface Category {
  id: string;
  surface: string;
  kind: string;
  aliases: string[];
}

export interface ConformanceVector {
  input: string;
  outcome: "ok" | "unknown-tag" | "unbalanced-bracket";
  canonical?: string;
}

export interface TaxonomyDoc {
  version: string;
  none_surface: string;
  categories: Category[];
  conformance: ConformanceVector[];
}

export type Token =
  | { kind: "lexical"; unit: string }
  | { kind: "tag"; category: Category };

export type ParseResult =
  | { ok: true; tokens: Token[] }
  | {
      ok: false;
      error: "unknown-tag" | "unbalanced-bracket";
      byteOffset: number;
      charOffset: number;
      surface?: string;
    };

const encoder = new TextEncoder();
const segmenter = new Intl.Segmenter(undefined, { granularity: "grapheme" });

function byteOffset(text: string, index: number): number {
  return encoder.encode(text.slice(0, index)).length;
}

function isWhitespace(unit: string): boolean {
  return unit.trim().length === 0;
}

export function surfaceIndex(taxonomy: TaxonomyDoc): Map<string, Category> {
  const index = new Map<string, Category>();
  for (const cat of taxonomy.categories) {
    index.set(cat.surface, cat);
    for (const alias of cat.aliases) index.set(alias, cat);
  }
  return index;
}

export function parse(raw: string, taxonomy: TaxonomyDoc): ParseResult {
  const text = raw.normalize("NFC");
  const surfaces = surfaceIndex(taxonomy);
  const tokens: Token[] = [];
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (ch === "[") {
      const close = text.indexOf("]", i + 1);
      const reopen = text.indexOf("[", i + 1);
      if (close === -1 || (reopen !== -1 && reopen < close)) {
        return {
          ok: false,
          error: "unbalanced-bracket",
          byteOffset: byteOffset(text, i),
          charOffset: i,
        };
      }
      const span = text.slice(i, close + 1);
      const cat = surfaces.get(span);
      if (!cat) {
        return {
          ok: false,
          error: "unknown-tag",
          byteOffset: byteOffset(text, i),
          charOffset: i,
          surface: span,
        };
      }
      tokens.push({ kind: "tag", category: cat });
      i = close + 1;
    } else if (ch === "]") {
      return {
        ok: false,
        error: "unbalanced-bracket",
        byteOffset: byteOffset(text, i),
        charOffset: i,
      };
    } else {
      let j = i;
      while (j < text.length && text[j] !== "[" && text[j] !== "]") j++;
      for (const seg of segmenter.segment(text.slice(i, j))) {
        if (!isWhitespace(seg.segment)) {
          tokens.push({ kind: "lexical", unit: seg.segment });
        }
      }
      i = j;
    }
  }
  return { ok: true, tokens };
}

export function serialize(tokens: Token[]): string {
  return tokens
    .map((t) => (t.kind === "lexical" ? t.unit : t.category.surface))
    .join("");
}

/** The lexical text with all tags removed (used to seed editor drafts). */
export function stripTags(raw: string, taxonomy: TaxonomyDoc): string {
  const result = parse(raw, taxonomy);
  if (!result.ok) return raw;
  return result.tokens
    .filter((t) => t.kind === "lexical")
    .map((t) => (t.kind === "lexical" ? t.unit : ""))
    .join("");
}

export interface ConformanceFailure {
  vector: ConformanceVector;
  got: string;
}

/**
 * Replay the served conformance vectors through this parser. An empty
 * result proves the client grammar matches the server's; the session must
 * refuse to start otherwise.
 */
export function runConformance(taxonomy: TaxonomyDoc): ConformanceFailure[] {
  const failures: ConformanceFailure[] = [];
  for (const vector of taxonomy.conformance) {
    const result = parse(vector.input, taxonomy);
    if (vector.outcome === "ok") {
      if (!result.ok) {
        failures.push({ vector, got: result.error });
      } else if (
        vector.canonical !== undefined &&
        serialize(result.tokens) !== vector.canonical
      ) {
        failures.push({ vector, got: serialize(result.tokens) });
      }
    } else if (result.ok) {
      failures.push({ vector, got: "ok" });
    } else if (result.error !== vector.outcome) {
      failures.push({ vector, got: result.error });
    }
  }
  return failures;
}
