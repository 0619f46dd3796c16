#!/usr/bin/env node
// SMT-LIB 2 adapter: reads commands from stdin, evaluates them on a
// persistent z3 context (WebAssembly build), writes replies to stdout.
//
// Behaves like `z3 -in` for the command subset used here: state persists
// across commands, (push)/(pop) scope declarations and assertions,
// (set-option :timeout N) bounds a single (check-sat), and errors come
// back inline as (error "...") without killing the process.

'use strict';

const { init } = require('z3-solver');

// Splits a stream of text into complete top-level s-expressions.
// Tracks string literals ("" escapes), quoted symbols (|...|) and
// line comments (;) so parentheses inside them do not count.
class CommandBuffer {
  constructor() {
    this.buf = '';
    this.pos = 0;
    this.depth = 0;
    this.start = -1;
    this.inString = false;
    this.inSymbol = false;
    this.inComment = false;
  }

  push(chunk) {
    this.buf += chunk;
    const out = [];
    while (this.pos < this.buf.length) {
      const ch = this.buf[this.pos];
      if (this.inComment) {
        if (ch === '\n') this.inComment = false;
      } else if (this.inString) {
        if (ch === '"') this.inString = false;
      } else if (this.inSymbol) {
        if (ch === '|') this.inSymbol = false;
      } else if (ch === ';') {
        this.inComment = true;
      } else if (ch === '"') {
        this.inString = true;
      } else if (ch === '|') {
        this.inSymbol = true;
      } else if (ch === '(') {
        if (this.depth === 0) this.start = this.pos;
        this.depth += 1;
      } else if (ch === ')') {
        this.depth -= 1;
        if (this.depth === 0) {
          out.push(this.buf.slice(this.start, this.pos + 1));
        }
        if (this.depth < 0) this.depth = 0; // stray ')': drop it
      }
      this.pos += 1;
    }
    // keep only the unconsumed tail
    if (this.depth === 0 && out.length) {
      this.buf = this.buf.slice(this.pos);
      this.pos = 0;
      this.start = -1;
    }
    return out;
  }
}

(async () => {
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);

  const pending = [];
  let draining = false;

  async function drain() {
    if (draining) return;
    draining = true;
    while (pending.length) {
      // Evaluate everything queued so far in one call. The wasm bridge
      // very occasionally hands z3 a corrupted copy of the string it was
      // given; fewer, larger calls shrink the exposure, and the client
      // retries on inline (error ...) replies either way.
      const batch = [];
      let sawExit = false;
      while (pending.length) {
        const cmd = pending.shift();
        if (/^\(\s*exit\s*\)$/.test(cmd)) {
          sawExit = true;
          break;
        }
        batch.push(cmd);
      }
      if (batch.length) {
        let reply;
        try {
          reply = await Z3.eval_smtlib2_string(ctx, batch.join('\n'));
        } catch (err) {
          reply = '(error "' + String(err).replace(/"/g, "'") + '")\n';
        }
        if (reply && reply.length) {
          process.stdout.write(reply.endsWith('\n') ? reply : reply + '\n');
        }
      }
      if (sawExit) {
        process.exit(0);
      }
    }
    draining = false;
  }

  const commands = new CommandBuffer();
  process.stdin.setEncoding('utf8');
  process.stdin.on('data', (chunk) => {
    for (const cmd of commands.push(chunk)) pending.push(cmd);
    drain().catch(() => process.exit(1));
  });
  process.stdin.on('end', () => {
    // finish anything already queued, then quit
    drain().then(() => process.exit(0)).catch(() => process.exit(1));
  });
})().catch((err) => {
  process.stderr.write('solver shim failed to start: ' + String(err) + '\n');
  process.exit(1);
});
