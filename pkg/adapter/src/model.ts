/**
 * A deliberately tiny, attention-free sequence model.
 *
 * Training accumulates two kinds of state: an exact sequence memory
 * (source line -> target line, enough to memorize well over a thousand
 * pairs) and token co-occurrence counts used as a translation backoff for
 * unseen inputs. Prediction returns the memorized target when the source
 * was seen, otherwise maps each source token to its most frequent
 * co-occurring target token (copying tokens it has never seen). All tie
 * breaks are lexicographic, so the model is bit-for-bit deterministic.
 */

export interface ModelState {
  seed: number;
  memory: Record<string, string>;
  cooccurrence: Record<string, Record<string, number>>;
}

export function emptyState(seed: number): ModelState {
  return { seed, memory: {}, cooccurrence: {} };
}

function normalize(line: string): string {
  return line.split(/\s+/).filter((t) => t.length > 0).join(" ");
}

export function trainEpoch(state: ModelState, pairs: Array<[string, string]>): void {
  for (const [rawSrc, rawTgt] of pairs) {
    const src = normalize(rawSrc);
    const tgt = normalize(rawTgt);
    state.memory[src] = tgt;
    const tgtTokens = tgt.length > 0 ? tgt.split(" ") : [];
    for (const srcToken of src.length > 0 ? src.split(" ") : []) {
      const row = (state.cooccurrence[srcToken] ??= {});
      for (const tgtToken of tgtTokens) {
        row[tgtToken] = (row[tgtToken] ?? 0) + 1;
      }
    }
  }
}

function backoffToken(state: ModelState, token: string): string {
  const row = state.cooccurrence[token];
  if (row === undefined) {
    return token; // copy unknown material through
  }
  let best: string | undefined;
  let bestCount = -1;
  for (const candidate of Object.keys(row).sort()) {
    if (row[candidate] > bestCount) {
      best = candidate;
      bestCount = row[candidate];
    }
  }
  return best ?? token;
}

export function predictLine(state: ModelState, rawInput: string, beamSize: number): string {
  if (beamSize < 1) {
    throw new Error(`beam size must be >= 1, got ${beamSize}`);
  }
  const input = normalize(rawInput);
  const memorized = state.memory[input];
  if (memorized !== undefined) {
    return memorized;
  }
  if (input.length === 0) {
    return "";
  }
  return input
    .split(" ")
    .map((token) => backoffToken(state, token))
    .join(" ");
}

export function exactMatch(state: ModelState, pairs: Array<[string, string]>, beamSize: number): number {
  if (pairs.length === 0) {
    return 0;
  }
  let hits = 0;
  for (const [src, tgt] of pairs) {
    if (predictLine(state, src, beamSize) === normalize(tgt)) {
      hits += 1;
    }
  }
  return hits / pairs.length;
}

/** JSON with sorted keys at every level: checkpoint bytes are stable. */
function sortedJson(value: unknown): string {
  if (Array.isArray(value)) {
    return "[" + value.map(sortedJson).join(",") + "]";
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.keys(value as Record<string, unknown>)
      .sort()
      .map((k) => JSON.stringify(k) + ":" + sortedJson((value as Record<string, unknown>)[k]));
    return "{" + entries.join(",") + "}";
  }
  return JSON.stringify(value);
}

export function serializeState(state: ModelState): string {
  return sortedJson(state);
}

export function deserializeState(text: string): ModelState {
  const parsed = JSON.parse(text) as Partial<ModelState>;
  if (
    typeof parsed !== "object" ||
    parsed === null ||
    typeof parsed.memory !== "object" ||
    typeof parsed.cooccurrence !== "object"
  ) {
    throw new Error("checkpoint does not look like a model state");
  }
  return {
    seed: typeof parsed.seed === "number" ? parsed.seed : 0,
    memory: parsed.memory as Record<string, string>,
    cooccurrence: parsed.cooccurrence as Record<string, Record<string, number>>,
  };
}
