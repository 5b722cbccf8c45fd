import { execFileSync } from 'node:child_process'
import fs from 'node:fs'
import os from 'node:os'
import path from 'node:path'

import { describe, expect, it } from 'vitest'

import { initCheckpoint, mulberry32, saveCheckpoint } from './checkpoint.js'
import { writePnm, writeWav } from './formats.js'
import { runExtract } from './cli.js'

/**
 * End-to-end contract with the engine: adapter outputs dropped next to a
 * dataset manifest must pass `auxfuse check --merge-fragments` cleanly.
 */
describe('engine integration', () => {
  it('merged adapter blocks pass the engine check command', () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), 'adapters-engine-'))
    const ids = [...Array(8).keys()].map(i => `s${i}`)

    // a minimal engine dataset: reid block + metadata for 8 samples
    const manifest = {
      version: 1,
      blocks: [{ name: 'reid', dim: 4 }],
      samples: ids.map((id, i) => ({
        id,
        identity: i % 4,
        camera: i % 2,
        split: 'train',
      })),
    }
    fs.writeFileSync(path.join(dir, 'manifest.json'), JSON.stringify(manifest, null, 2))
    const rand = mulberry32(99)
    const reid = Buffer.alloc(ids.length * 4 * 4)
    for (let i = 0; i < ids.length * 4; i++) reid.writeFloatLE(2 * rand() - 1, 4 * i)
    fs.writeFileSync(path.join(dir, 'reid.f32'), reid)

    // raw inputs: one patch and one recording per sample
    const inputs = path.join(dir, 'raw')
    fs.mkdirSync(inputs)
    ids.forEach((id, i) => {
      const prand = mulberry32(1000 + i)
      const data = new Uint8Array(32 * 48)
      for (let j = 0; j < data.length; j++) data[j] = Math.floor(prand() * 256)
      writePnm(path.join(inputs, `${id}.pgm`), { width: 32, height: 48, channels: 1, data })
      const tone = new Float64Array(8000)
      for (let j = 0; j < tone.length; j++) tone[j] = 0.5 * Math.sin((2 * Math.PI * (200 + 50 * i) * j) / 16000)
      writeWav(path.join(inputs, `${id}.wav`), tone)
    })
    const samples = path.join(dir, 'samples.txt')
    fs.writeFileSync(samples, ids.map(id => id + '\n').join(''))

    for (const kind of ['tattoo', 'age_gender', 'audio'] as const) {
      const ckFile = path.join(dir, `${kind}.ck.json`)
      saveCheckpoint(ckFile, initCheckpoint(kind, { seed: 17 }))
      runExtract(kind, { inputs, samples, checkpoint: ckFile, out: dir })
    }

    const stdout = execFileSync('auxfuse', ['check', '--merge-fragments', dir], {
      encoding: 'utf8',
    })
    expect(stdout).toContain('ok: 8 samples, 4 blocks')

    // the merge registered each adapter block with its declared dim
    const merged = JSON.parse(fs.readFileSync(path.join(dir, 'manifest.json'), 'utf8'))
    const dims = Object.fromEntries(merged.blocks.map((b: { name: string; dim: number }) => [b.name, b.dim]))
    expect(dims).toEqual({ reid: 4, tattoo: 256, age_gender: 512, audio: 2048 })
  })
})
