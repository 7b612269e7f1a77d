// The gateway reports PII spans as byte offsets into the UTF-8 encoding of
// a payload value; JS strings index UTF-16 code units, so spans must be
// remapped before slicing.

const encoder = new TextEncoder();

/**
 * Convert a UTF-8 byte span to [start, end) character (code-unit) offsets
 * in `value`. Out-of-range or misaligned spans are clamped to the nearest
 * character boundary so a malformed span can never distort the rendered
 * payload text.
 */
export function byteSpanToCharRange(
  value: string,
  span: readonly [number, number],
): [number, number] {
  const [byteStart, byteEnd] = span;
  let bytes = 0;
  let charStart = value.length;
  let charEnd = value.length;
  let startFound = false;
  let i = 0;
  while (i < value.length) {
    if (!startFound && bytes >= byteStart) {
      charStart = i;
      startFound = true;
    }
    if (bytes >= byteEnd) {
      charEnd = i;
      break;
    }
    const codePoint = value.codePointAt(i)!;
    const unitLen = codePoint > 0xffff ? 2 : 1;
    bytes += encoder.encode(value.slice(i, i + unitLen)).length;
    i += unitLen;
  }
  if (!startFound && bytes >= byteStart) charStart = value.length;
  if (bytes >= byteEnd && charEnd > value.length) charEnd = value.length;
  if (charEnd < charStart) charEnd = charStart;
  return [charStart, charEnd];
}

/** Split `value` into segments, marking the PII spans for one payload key. */
export interface Segment {
  readonly text: string;
  readonly kind: string | null;
}

export function segmentValue(
  value: string,
  spans: readonly { span: readonly [number, number]; kind: string }[],
): Segment[] {
  const ranges = spans
    .map((s) => ({ range: byteSpanToCharRange(value, s.span), kind: s.kind }))
    .filter(({ range }) => range[1] > range[0])
    .sort((a, b) => a.range[0] - b.range[0]);
  const segments: Segment[] = [];
  let cursor = 0;
  for (const { range, kind } of ranges) {
    const [start, end] = range;
    if (start < cursor) continue; // overlapping span: keep the earlier one
    if (start > cursor) segments.push({ text: value.slice(cursor, start), kind: null });
    segments.push({ text: value.slice(start, end), kind });
    cursor = end;
  }
  if (cursor < value.length) segments.push({ text: value.slice(cursor), kind: null });
  if (segments.length === 0) segments.push({ text: "", kind: null });
  return segments;
}
