#!/usr/bin/env node
/**
 * One command per adapter kind. Each extraction command reads a directory of
 * patches/recordings plus a sample list, and writes `<kind>.f32` and
 * `<kind>.fragment.json` ready for the engine's `check --merge-fragments`.
 */
import yargs, { type Argv } from 'yargs'
import { hideBin } from 'yargs/helpers'

import { extractAudioBlock } from './audio.js'
import { DETECTOR_KINDS, FIXED_DIMS, Kind, KINDS, initCheckpoint, loadCheckpoint, saveCheckpoint } from './checkpoint.js'
import { readSampleList, writeBlock } from './formats.js'
import { extractImageBlock } from './image.js'

type ExtractArgs = {
  inputs: string
  samples: string
  checkpoint: string
  out: string
}

export function runExtract(kind: Kind, args: ExtractArgs): string {
  const ck = loadCheckpoint(args.checkpoint, kind)
  const sampleIds = readSampleList(args.samples)
  const rows =
    kind === 'audio'
      ? extractAudioBlock(args.inputs, sampleIds, ck)
      : extractImageBlock(args.inputs, sampleIds, ck)
  const { blockFile } = writeBlock(args.out, kind, rows, ck.dim, sampleIds)
  return `wrote ${rows.length} x ${ck.dim} rows to ${blockFile}`
}

export function runInitCheckpoint(args: { kind: Kind; out: string; dim?: number; scale: number; seed: number }): string {
  const ck = initCheckpoint(args.kind, { dim: args.dim, scale: args.scale, seed: args.seed })
  saveCheckpoint(args.out, ck)
  return `wrote ${args.kind} checkpoint (dim ${ck.dim}, scale ${ck.scale}) to ${args.out}`
}

function extractOptions(y: Argv) {
  return y
    .option('inputs', { type: 'string', demandOption: true, describe: 'directory of patches/recordings' })
    .option('samples', { type: 'string', demandOption: true, describe: 'sample id list, one per line' })
    .option('checkpoint', { type: 'string', demandOption: true, describe: 'frozen extractor checkpoint' })
    .option('out', { type: 'string', demandOption: true, describe: 'output directory' })
}

export function buildCli(argv: string[]) {
  let cli = yargs(argv)
    .scriptName('auxfuse-adapters')
    .strict()
    .demandCommand(1)
    .fail((msg, err) => {
      process.stderr.write(`error: ${err ? err.message : msg}\n`)
      process.exit(1)
    })
    .command(
      'init-checkpoint',
      'Generate a frozen extractor checkpoint',
      y =>
        y
          .option('kind', { choices: KINDS, demandOption: true })
          .option('out', { type: 'string', demandOption: true })
          .option('dim', { type: 'number', describe: 'output dim (detector kinds only)' })
          .option('scale', { type: 'number', default: 1, describe: 'backbone scale index (0..3)' })
          .option('seed', { type: 'number', default: 0 }),
      args => {
        console.log(runInitCheckpoint(args as Parameters<typeof runInitCheckpoint>[0]))
      },
    )
  for (const kind of KINDS) {
    const what = DETECTOR_KINDS.includes(kind)
      ? `scale-s ${kind} detector features`
      : kind === 'age_gender'
        ? `${FIXED_DIMS.age_gender}-dim age & gender features`
        : `${FIXED_DIMS.audio}-dim audio features`
    cli = cli.command(kind, `Extract ${what}`, extractOptions, args => {
      console.log(runExtract(kind, args as unknown as ExtractArgs))
    })
  }
  return cli
}

const invokedDirectly = process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])
if (invokedDirectly) {
  try {
    buildCli(hideBin(process.argv)).parseSync()
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`)
    process.exit(1)
  }
}
