#!/usr/bin/env node
/**
 * Entry point. Loads the requested scorer and serves it over HTTP
 * (default) or stdio. Diagnostics go to stderr so stdio mode keeps
 * stdout clean for the protocol.
 */

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { PROTOCOL_VERSION } from './protocol.js';
import { loadScorer } from './scorers.js';
import { createApp, serve } from './server.js';
import { runStdio } from './stdio.js';

async function main(): Promise<void> {
  const argv = await yargs(hideBin(process.argv))
    .option('scorer', {
      type: 'string',
      default: 'echo',
      describe: 'echo | constant:P | path to a module exporting createScorer(options)',
    })
    .option('stdio', {
      type: 'boolean',
      default: false,
      describe: 'speak line-delimited JSON on stdin/stdout instead of HTTP',
    })
    .option('host', { type: 'string', default: '127.0.0.1' })
    .option('port', { type: 'number', default: 8787, describe: '0 picks a free port' })
    .option('device', { type: 'string', describe: 'passed through to the scorer module' })
    .option('max-batch', { type: 'number', default: 8 })
    .option('timeout-ms', { type: 'number', default: 30000 })
    .strict()
    .help()
    .parse();

  const scorer = await loadScorer(argv.scorer, { device: argv.device });
  const config = { maxBatchSize: argv.maxBatch, timeoutMs: argv.timeoutMs };

  if (argv.stdio) {
    process.stderr.write(`serving ${scorer.name} on stdio (protocol ${PROTOCOL_VERSION})\n`);
    await runStdio(scorer, config);
    return;
  }

  const server = await serve(createApp(scorer, config), argv.host, argv.port);
  const address = server.address();
  const port = typeof address === 'object' && address ? address.port : argv.port;
  process.stderr.write(`listening on http://${argv.host}:${port}\n`);
  process.stderr.write(`serving ${scorer.name} (protocol ${PROTOCOL_VERSION})\n`);
}

main().catch((err) => {
  process.stderr.write(`fatal: ${err instanceof Error ? err.message : String(err)}\n`);
  process.exit(1);
});
