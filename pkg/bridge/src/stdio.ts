/**
 * Stdio mode: one JSON request per stdin line, one JSON response per
 * stdout line, in order. Malformed lines answer {"error": str} and the
 * loop keeps going, so a confused client never wedges the server.
 */

import { createInterface } from 'node:readline';
import type { Readable, Writable } from 'node:stream';

import { errorBody, scoreRequestSchema, validationMessage } from './protocol.js';
import { ScoreQueue } from './queue.js';
import type { Scorer } from './scorers.js';
import type { ServerConfig } from './server.js';

export async function runStdio(
  scorer: Scorer,
  config: ServerConfig,
  input: Readable = process.stdin,
  output: Writable = process.stdout,
): Promise<void> {
  const queue = new ScoreQueue(scorer, config.maxBatchSize, config.timeoutMs);
  const rl = createInterface({ input, crlfDelay: Infinity });

  for await (const line of rl) {
    if (!line.trim()) continue;
    let reply: object;
    try {
      const parsed = scoreRequestSchema.safeParse(JSON.parse(line));
      reply = parsed.success
        ? { p_true: await queue.score(parsed.data) }
        : { error: validationMessage(parsed.error) };
    } catch (err) {
      reply = errorBody(err);
    }
    output.write(JSON.stringify(reply) + '\n');
  }
}
