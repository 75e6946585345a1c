// pdflatex-compatible front end: forwards the job to the daemon.
const net = require('net');
const fs = require('fs');
const path = require('path');
const { spawn } = require('child_process');

const argv = process.argv.slice(2);
if (argv.includes('--version') || argv.includes('-version')) {
  console.log('pdfTeX 3.1415926-1.40.11 (TeX Live 2010, wasm build via pdflatex-wasm)');
  process.exit(0);
}
let outdir = process.cwd();
let jobname = null;
let interaction = 'nonstopmode';
let haltOnError = false;
let texfile = null;
for (let i = 0; i < argv.length; i++) {
  const a = argv[i];
  let m;
  if ((m = a.match(/^--?output-directory=(.*)$/))) outdir = m[1];
  else if (a === '-output-directory' || a === '--output-directory') outdir = argv[++i];
  else if ((m = a.match(/^--?jobname=(.*)$/))) jobname = m[1];
  else if ((m = a.match(/^--?interaction=(.*)$/))) interaction = m[1];
  else if (a === '-halt-on-error' || a === '--halt-on-error') haltOnError = true;
  else if (a.startsWith('-')) { /* ignored */ }
  else texfile = a;
}
if (!texfile) { console.error('pdflatex-wasm: no input file'); process.exit(1); }
if (!texfile.endsWith('.tex') && !fs.existsSync(texfile)) texfile += '.tex';
const abs = path.resolve(texfile);
const base = jobname || path.basename(abs).replace(/\.tex$/, '');
const args = ['-interaction=' + interaction, '-output-format', 'pdf'];
if (haltOnError) args.push('-halt-on-error');
args.push('-jobname=' + base, 'input.tex');
const timeoutMs = Number(process.env.PDFLATEX_WASM_TIMEOUT_S || 120) * 1000;
const job = { inputs: { 'input.tex': abs }, args, outdir: path.resolve(outdir), timeoutMs };
if (process.env.SOURCE_DATE_EPOCH) job.epoch = Number(process.env.SOURCE_DATE_EPOCH);

const sock = process.env.PDFLATEX_WASM_SOCKET || path.join(require('os').tmpdir(), 'pdflatex-wasm-' + process.getuid() + '.sock');

function send(attempt) {
  const c = net.connect(sock);
  let buf = '';
  c.on('connect', () => c.write(JSON.stringify(job) + '\n'));
  c.on('data', (d) => { buf += d; });
  c.on('end', () => {
    const r = JSON.parse(buf);
    if (r.stdout) process.stdout.write(r.stdout + '\n');
    process.exit(r.status);
  });
  c.on('error', () => {
    if (attempt === 0) {
      const d = spawn(process.execPath, [path.join(__dirname, 'daemon.js'), sock], { detached: true, stdio: 'ignore' });
      d.unref();
    }
    if (attempt > 200) { console.error('pdflatex-wasm: daemon unavailable'); process.exit(1); }
    setTimeout(() => send(attempt + 1), 50);
  });
}
send(0);
