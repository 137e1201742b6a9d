/**
 * Scorer implementations and the loader for user-supplied model modules.
 *
 * A scorer maps batches of {query, context} requests to probabilities in
 * [0, 1]. The built-ins are `echo` (deterministic hash, the conformance
 * anchor shared with the Python side) and `constant:P` (fixed score).
 * Anything else is treated as a path to a JS module exporting a
 * `createScorer(options)` factory, which is how a real model gets served.
 */

import { createHash } from 'node:crypto';
import { resolve } from 'node:path';
import { pathToFileURL } from 'node:url';

import type { ScoreRequest } from './protocol.js';

export interface Scorer {
  name: string;
  version: string;
  scoreBatch(batch: ScoreRequest[]): Promise<number[]> | number[];
}

export interface ScorerOptions {
  device?: string;
}

/**
 * Serialize like Python's json.dumps(..., separators=(",", ":"),
 * ensure_ascii=True): compact, with every code unit from U+007F up
 * escaped as a lowercase \uXXXX sequence (astral characters become
 * surrogate pairs, exactly as Python emits them).
 */
export function asciiJson(value: unknown): string {
  return JSON.stringify(value).replace(
    /[-￿]/g,
    (ch) => '\\u' + ch.charCodeAt(0).toString(16).padStart(4, '0'),
  );
}

/** First eight hex digits of sha256 over the canonical payload, scaled into [0, 1). */
export function echoScore(query: string, context: string[]): number {
  const payload = asciiJson({ query, context });
  const digest = createHash('sha256').update(payload).digest('hex');
  return parseInt(digest.slice(0, 8), 16) / 0x100000000;
}

export function echoScorer(): Scorer {
  return {
    name: 'echo',
    version: '1',
    scoreBatch: (batch) => batch.map((r) => echoScore(r.query, r.context)),
  };
}

export function constantScorer(p: number): Scorer {
  if (!Number.isFinite(p) || p < 0 || p > 1) {
    throw new Error(`constant score must be in [0, 1], got ${p}`);
  }
  return {
    name: `constant:${p}`,
    version: '1',
    scoreBatch: (batch) => batch.map(() => p),
  };
}

function checkScorer(value: unknown, ref: string): Scorer {
  const scorer = value as Scorer;
  if (
    !scorer ||
    typeof scorer.name !== 'string' ||
    typeof scorer.version !== 'string' ||
    typeof scorer.scoreBatch !== 'function'
  ) {
    throw new Error(`scorer module ${ref} must produce {name, version, scoreBatch}`);
  }
  return scorer;
}

/**
 * Resolve a scorer reference: `echo`, `constant:P`, or a module path.
 * A module must export `createScorer(options)` (or default-export it);
 * the factory may be async. Load failures propagate so the CLI can exit
 * nonzero instead of serving a broken model.
 */
export async function loadScorer(ref: string, options: ScorerOptions = {}): Promise<Scorer> {
  if (ref === 'echo') return echoScorer();
  if (ref.startsWith('constant:')) {
    return constantScorer(Number(ref.slice('constant:'.length)));
  }
  const url = pathToFileURL(resolve(ref)).href;
  const module = await import(url);
  const factory = module.createScorer ?? module.default;
  if (typeof factory !== 'function') {
    throw new Error(`scorer module ${ref} does not export createScorer`);
  }
  return checkScorer(await factory(options), ref);
}
