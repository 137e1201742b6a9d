import { describe, expect, it } from 'vitest';

import { scoreRequestSchema, validationMessage } from '../src/protocol.js';

describe('scoreRequestSchema', () => {
  it('accepts a well-formed request', () => {
    const parsed = scoreRequestSchema.safeParse({ query: 'q', context: ['a', 'b'] });
    expect(parsed.success).toBe(true);
  });

  it('accepts an empty context', () => {
    expect(scoreRequestSchema.safeParse({ query: 'q', context: [] }).success).toBe(true);
  });

  it.each([
    [{ context: ['a'] }, 'missing query'],
    [{ query: 'q' }, 'missing context'],
    [{ query: 1, context: [] }, 'non-string query'],
    [{ query: 'q', context: 'a' }, 'non-list context'],
    [{ query: 'q', context: [1] }, 'non-string context entry'],
    [{ query: 'q', context: [], extra: true }, 'unknown key'],
    [null, 'null body'],
    ['text', 'non-object body'],
  ])('rejects %j (%s)', (body) => {
    const parsed = scoreRequestSchema.safeParse(body);
    expect(parsed.success).toBe(false);
    if (!parsed.success) {
      const message = validationMessage(parsed.error);
      expect(message).toContain('invalid request');
    }
  });
});
