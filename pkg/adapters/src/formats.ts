/**
 * File-format helpers shared by all adapters: PGM/PPM image patches,
 * PCM16 WAV recordings, and the engine-side feature block files
 * (`<block>.f32` + `<block>.fragment.json`).
 */
import fs from 'node:fs'
import path from 'node:path'

export type Image = {
  width: number
  height: number
  channels: 1 | 3
  /** row-major, interleaved, 8-bit */
  data: Uint8Array
}

/** Read a binary netpbm image (P5 grayscale or P6 RGB, maxval <= 255). */
export function readPnm(file: string): Image {
  let buf: Buffer
  try {
    buf = fs.readFileSync(file)
  } catch (e) {
    throw new Error(`unreadable image: ${file}`)
  }
  const magic = buf.subarray(0, 2).toString('ascii')
  if (magic !== 'P5' && magic !== 'P6') {
    throw new Error(`unreadable image: ${file} (expected P5/P6, got ${JSON.stringify(magic)})`)
  }
  // header tokens: width height maxval, with '#' comments allowed
  let pos = 2
  const tokens: number[] = []
  while (tokens.length < 3) {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++
    if (buf[pos] === 0x23) {
      // comment line
      while (pos < buf.length && buf[pos] !== 0x0a) pos++
      continue
    }
    let start = pos
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++
    const tok = buf.subarray(start, pos).toString('ascii')
    const val = Number(tok)
    if (!Number.isInteger(val) || val <= 0) {
      throw new Error(`unreadable image: ${file} (bad header token ${JSON.stringify(tok)})`)
    }
    tokens.push(val)
  }
  pos++ // single whitespace byte after maxval
  const [width, height, maxval] = tokens
  if (maxval > 255) {
    throw new Error(`unreadable image: ${file} (maxval ${maxval} > 255 unsupported)`)
  }
  const channels = magic === 'P6' ? 3 : 1
  const need = width * height * channels
  const data = buf.subarray(pos, pos + need)
  if (data.length !== need) {
    throw new Error(`unreadable image: ${file} (${data.length} payload bytes, expected ${need})`)
  }
  return { width, height, channels: channels as 1 | 3, data: new Uint8Array(data) }
}

export function writePnm(file: string, img: Image): void {
  const header = `${img.channels === 3 ? 'P6' : 'P5'}\n${img.width} ${img.height}\n255\n`
  fs.writeFileSync(file, Buffer.concat([Buffer.from(header, 'ascii'), Buffer.from(img.data)]))
}

/** Read a mono PCM16 WAV file into float samples in [-1, 1]. */
export function readWav(file: string): Float64Array {
  let buf: Buffer
  try {
    buf = fs.readFileSync(file)
  } catch (e) {
    throw new Error(`undecodable audio: ${file}`)
  }
  if (buf.length < 12 || buf.toString('ascii', 0, 4) !== 'RIFF' || buf.toString('ascii', 8, 12) !== 'WAVE') {
    throw new Error(`undecodable audio: ${file} (not a RIFF/WAVE file)`)
  }
  let fmt: { audioFormat: number; channels: number; bitsPerSample: number } | null = null
  let data: Buffer | null = null
  let pos = 12
  while (pos + 8 <= buf.length) {
    const id = buf.toString('ascii', pos, pos + 4)
    const size = buf.readUInt32LE(pos + 4)
    const body = buf.subarray(pos + 8, pos + 8 + size)
    if (id === 'fmt ') {
      fmt = {
        audioFormat: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        bitsPerSample: body.readUInt16LE(14),
      }
    } else if (id === 'data') {
      data = body
    }
    pos += 8 + size + (size % 2)
  }
  if (!fmt || !data) throw new Error(`undecodable audio: ${file} (missing fmt/data chunk)`)
  if (fmt.audioFormat !== 1 || fmt.bitsPerSample !== 16) {
    throw new Error(`undecodable audio: ${file} (only PCM16 supported)`)
  }
  if (fmt.channels !== 1) {
    throw new Error(`undecodable audio: ${file} (expected mono, got ${fmt.channels} channels)`)
  }
  const n = Math.floor(data.length / 2)
  const out = new Float64Array(n)
  for (let i = 0; i < n; i++) out[i] = data.readInt16LE(2 * i) / 32768
  return out
}

export function writeWav(file: string, samples: Float64Array, sampleRate = 16000, channels = 1): void {
  const n = samples.length
  const body = Buffer.alloc(n * 2)
  for (let i = 0; i < n; i++) {
    const v = Math.max(-1, Math.min(1, samples[i]))
    body.writeInt16LE(Math.round(v * 32767), 2 * i)
  }
  const header = Buffer.alloc(44)
  header.write('RIFF', 0, 'ascii')
  header.writeUInt32LE(36 + body.length, 4)
  header.write('WAVE', 8, 'ascii')
  header.write('fmt ', 12, 'ascii')
  header.writeUInt32LE(16, 16)
  header.writeUInt16LE(1, 20) // PCM
  header.writeUInt16LE(channels, 22)
  header.writeUInt32LE(sampleRate, 24)
  header.writeUInt32LE(sampleRate * channels * 2, 28)
  header.writeUInt16LE(channels * 2, 32)
  header.writeUInt16LE(16, 34)
  header.write('data', 36, 'ascii')
  header.writeUInt32LE(body.length, 40)
  fs.writeFileSync(file, Buffer.concat([header, body]))
}

/** One sample id per non-empty line; order defines row order. */
export function readSampleList(file: string): string[] {
  return fs
    .readFileSync(file, 'utf8')
    .split('\n')
    .map(line => line.trim())
    .filter(line => line.length > 0)
}

/** Write feature rows as little-endian float32, row-major, one row per sample. */
export function writeF32Block(file: string, rows: Float32Array[], dim: number): void {
  const buf = Buffer.alloc(rows.length * dim * 4)
  rows.forEach((row, i) => {
    if (row.length !== dim) {
      throw new Error(`row ${i} has length ${row.length}, declared dim is ${dim}`)
    }
    for (let j = 0; j < dim; j++) buf.writeFloatLE(row[j], (i * dim + j) * 4)
  })
  fs.writeFileSync(file, buf)
}

/** Manifest fragment the engine merges via `auxfuse check --merge-fragments`. */
export function writeFragment(file: string, name: string, dim: number, sampleIds: string[]): void {
  const frag = { name, dim, rows: sampleIds.length, sample_ids: sampleIds }
  fs.writeFileSync(file, JSON.stringify(frag, null, 2) + '\n')
}

/** Write both block artifacts for a kind into outDir; returns the two paths. */
export function writeBlock(
  outDir: string,
  name: string,
  rows: Float32Array[],
  dim: number,
  sampleIds: string[],
): { blockFile: string; fragmentFile: string } {
  fs.mkdirSync(outDir, { recursive: true })
  const blockFile = path.join(outDir, `${name}.f32`)
  const fragmentFile = path.join(outDir, `${name}.fragment.json`)
  writeF32Block(blockFile, rows, dim)
  writeFragment(fragmentFile, name, dim, sampleIds)
  return { blockFile, fragmentFile }
}
