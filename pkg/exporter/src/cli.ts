/** Command-line entry: nwa-export <checkpoint> -o <out.nwa> [--skip-unsupported] */

import { parseArgs } from 'node:util';

import { CheckpointError } from './checkpoint.js';
import { ExportError, exportCheckpoint } from './export.js';
import { NwaFormatError } from './nwa.js';

const USAGE = 'usage: nwa-export <checkpoint> -o <out.nwa> [--skip-unsupported]';

export function runCli(argv: string[]): number {
  let args;
  try {
    args = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        output: { type: 'string', short: 'o' },
        'skip-unsupported': { type: 'boolean', default: false },
        help: { type: 'boolean', short: 'h', default: false },
      },
    });
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }

  if (args.values.help) {
    process.stdout.write(`${USAGE}\n\n` +
      'Convert a sequential layers-model checkpoint (model.json plus weight\n' +
      'shards) into an NWA v1 weight archive.\n');
    return 0;
  }
  if (args.positionals.length !== 1 || !args.values.output) {
    process.stderr.write(`${USAGE}\n`);
    return 2;
  }

  const [checkpointPath] = args.positionals;
  const outPath = args.values.output;
  try {
    const plan = exportCheckpoint(checkpointPath, outPath, {
      skipUnsupported: args.values['skip-unsupported'],
    });
    const layerNames = plan.layers.map((l) =>
      l.batchnormFrom ? `${l.sourceName}+${l.batchnormFrom}` : l.sourceName);
    process.stdout.write(
      `wrote ${outPath}: ${plan.layers.length} layers (${layerNames.join(', ')})\n`);
    for (const name of plan.skipped) {
      process.stderr.write(`warning: skipped unsupported layer '${name}'\n`);
    }
    return 0;
  } catch (err) {
    if (err instanceof ExportError || err instanceof CheckpointError ||
        err instanceof NwaFormatError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
}
