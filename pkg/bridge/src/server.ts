/**
 * HTTP mode: POST /score answers the wire protocol, GET /health reports
 * the protocol and model versions. Every failure body is {"error": str}
 * with a non-200 status; responses depend only on the request body.
 */

import { createServer, Server } from 'node:http';

import express, { Express, NextFunction, Request, Response } from 'express';

import { PROTOCOL_VERSION, errorBody, scoreRequestSchema, validationMessage } from './protocol.js';
import { ScoreQueue } from './queue.js';
import type { Scorer } from './scorers.js';

export interface ServerConfig {
  maxBatchSize: number;
  timeoutMs: number;
}

export function createApp(scorer: Scorer, config: ServerConfig): Express {
  const queue = new ScoreQueue(scorer, config.maxBatchSize, config.timeoutMs);
  const app = express();
  app.use(express.json({ limit: '4mb' }));

  app.get('/health', (_req: Request, res: Response) => {
    res.json({
      status: 'ok',
      protocol_version: PROTOCOL_VERSION,
      model: scorer.name,
      model_version: scorer.version,
    });
  });

  app.post('/score', (req: Request, res: Response) => {
    const parsed = scoreRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: validationMessage(parsed.error) });
      return;
    }
    queue.score(parsed.data).then(
      (p) => res.json({ p_true: p }),
      (err) => res.status(500).json(errorBody(err)),
    );
  });

  app.use((req: Request, res: Response) => {
    res.status(404).json({ error: `no route for ${req.method} ${req.path}` });
  });

  // express funnels body-parser failures (malformed JSON, oversized
  // payloads) here; anything else is a server bug but still gets JSON
  app.use((err: Error, _req: Request, res: Response, _next: NextFunction) => {
    const status = 'status' in err && typeof err.status === 'number' ? err.status : 500;
    res.status(status).json(errorBody(err));
  });

  return app;
}

export function serve(app: Express, host: string, port: number): Promise<Server> {
  const server = createServer(app);
  return new Promise((resolve, reject) => {
    server.once('error', reject);
    server.listen(port, host, () => resolve(server));
  });
}
