/**
 * Audio adapter: summarises an arbitrary-length mono recording into a fixed
 * per-frame descriptor pooled over time, then projects it through the frozen
 * checkpoint into a 2048-dim row.
 */
import path from 'node:path'

import { AUDIO_SUMMARY_DIM, Checkpoint, project } from './checkpoint.js'
import { readWav } from './formats.js'

export const FRAME_LEN = 1024
export const HOP_LEN = 512
export const NUM_BANDS = 16

/** Log energies of 16 equal sub-bands of one frame. */
function bandLogEnergies(frame: Float64Array): Float64Array {
  const bandLen = FRAME_LEN / NUM_BANDS
  const out = new Float64Array(NUM_BANDS)
  for (let b = 0; b < NUM_BANDS; b++) {
    let acc = 0
    for (let i = b * bandLen; i < (b + 1) * bandLen; i++) acc += frame[i] * frame[i]
    out[b] = Math.log(1e-8 + acc / bandLen)
  }
  return out
}

/**
 * Pool per-frame band energies over time into mean/std/max/min per band
 * (16 bands x 4 statistics = 64 values). Recordings shorter than one frame
 * are zero-padded to a single frame, so any valid recording yields a row.
 */
export function summarize(samples: Float64Array): Float64Array {
  const frames: Float64Array[] = []
  if (samples.length < FRAME_LEN) {
    const padded = new Float64Array(FRAME_LEN)
    padded.set(samples)
    frames.push(bandLogEnergies(padded))
  } else {
    for (let start = 0; start + FRAME_LEN <= samples.length; start += HOP_LEN) {
      frames.push(bandLogEnergies(samples.subarray(start, start + FRAME_LEN)))
    }
  }
  const n = frames.length
  const out = new Float64Array(AUDIO_SUMMARY_DIM)
  for (let b = 0; b < NUM_BANDS; b++) {
    let mean = 0
    let max = -Infinity
    let min = Infinity
    for (const f of frames) {
      mean += f[b]
      if (f[b] > max) max = f[b]
      if (f[b] < min) min = f[b]
    }
    mean /= n
    let varAcc = 0
    for (const f of frames) varAcc += (f[b] - mean) ** 2
    out[4 * b] = mean
    out[4 * b + 1] = Math.sqrt(varAcc / n)
    out[4 * b + 2] = max
    out[4 * b + 3] = min
  }
  return out
}

export function extractAudioRow(file: string, ck: Checkpoint): Float32Array {
  return project(ck, summarize(readWav(file)))
}

export function extractAudioBlock(inputsDir: string, sampleIds: string[], ck: Checkpoint): Float32Array[] {
  return sampleIds.map(id => extractAudioRow(path.join(inputsDir, `${id}.wav`), ck))
}
