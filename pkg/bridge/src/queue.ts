/**
 * Micro-batching request queue. Concurrent requests are collected into
 * batches of at most `maxBatchSize` and handed to the scorer one batch
 * at a time, so model inference never runs concurrently with itself.
 */

import type { ScoreRequest } from './protocol.js';
import type { Scorer } from './scorers.js';

interface Pending {
  request: ScoreRequest;
  resolve: (score: number) => void;
  reject: (err: unknown) => void;
}

function withTimeout<T>(work: Promise<T>, ms: number): Promise<T> {
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error(`scorer timed out after ${ms}ms`)), ms);
    work.then(
      (value) => {
        clearTimeout(timer);
        resolve(value);
      },
      (err) => {
        clearTimeout(timer);
        reject(err);
      },
    );
  });
}

export class ScoreQueue {
  private pending: Pending[] = [];
  private draining = false;

  constructor(
    private readonly scorer: Scorer,
    private readonly maxBatchSize: number,
    private readonly timeoutMs: number,
  ) {
    if (maxBatchSize < 1) throw new Error('maxBatchSize must be at least 1');
    if (timeoutMs <= 0) throw new Error('timeoutMs must be positive');
  }

  score(request: ScoreRequest): Promise<number> {
    return new Promise((resolve, reject) => {
      this.pending.push({ request, resolve, reject });
      void this.drain();
    });
  }

  private async drain(): Promise<void> {
    if (this.draining) return;
    this.draining = true;
    try {
      while (this.pending.length > 0) {
        const batch = this.pending.splice(0, this.maxBatchSize);
        try {
          const scores = await withTimeout(
            Promise.resolve(this.scorer.scoreBatch(batch.map((p) => p.request))),
            this.timeoutMs,
          );
          this.settle(batch, scores);
        } catch (err) {
          for (const p of batch) p.reject(err);
        }
      }
    } finally {
      this.draining = false;
    }
  }

  private settle(batch: Pending[], scores: number[]): void {
    if (!Array.isArray(scores) || scores.length !== batch.length) {
      const err = new Error(
        `scorer returned ${Array.isArray(scores) ? scores.length : typeof scores} scores for a batch of ${batch.length}`,
      );
      for (const p of batch) p.reject(err);
      return;
    }
    batch.forEach((p, i) => {
      const score = scores[i];
      if (typeof score !== 'number' || !Number.isFinite(score) || score < 0 || score > 1) {
        p.reject(new Error(`scorer returned a score outside [0, 1]: ${score}`));
      } else {
        p.resolve(score);
      }
    });
  }
}
