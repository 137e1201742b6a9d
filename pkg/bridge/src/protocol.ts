/**
 * Victim wire protocol: request/response shapes shared with the logicprobe
 * attack harness. One scoring request carries a query sentence and a list
 * of context sentences; the answer is the probability that the query is
 * entailed. Failures are always reported as `{"error": string}`.
 */

import { z } from 'zod';

export const PROTOCOL_VERSION = 1;

export const scoreRequestSchema = z
  .object({
    query: z.string(),
    context: z.array(z.string()),
  })
  .strict();

export type ScoreRequest = z.infer<typeof scoreRequestSchema>;

export interface ScoreResponse {
  p_true: number;
}

export interface ErrorResponse {
  error: string;
}

/** Flatten a zod failure into one readable line. */
export function validationMessage(error: z.ZodError): string {
  const first = error.issues[0];
  if (!first) return 'invalid request';
  const where = first.path.length ? ` at ${first.path.join('.')}` : '';
  return `invalid request${where}: ${first.message}`;
}

export function errorBody(err: unknown): ErrorResponse {
  return { error: err instanceof Error ? err.message : String(err) };
}
