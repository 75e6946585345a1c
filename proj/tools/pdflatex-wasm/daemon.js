// Serves compile jobs on a unix socket. One warm worker at a time; a job
// exceeding its timeout kills the worker and a fresh one is started.
const net = require('net');
const fs = require('fs');
const path = require('path');
const { fork } = require('child_process');

const sock = process.argv[2];
const idleMs = Number(process.env.PDFLATEX_WASM_IDLE_S || 600) * 1000;
const nodeFlags = [];

let worker = null, ready = false, busy = null;
const queue = [];
let idleTimer = null;

function startWorker() {
  ready = false;
  worker = fork(path.join(__dirname, 'worker.js'), [], { stdio: ['ignore', 'ignore', 'ignore', 'ipc'], execArgv: nodeFlags });
  const w = worker;
  w.on('message', (m) => {
    if (w !== worker) return;
    if (m.ready) { ready = true; pump(); return; }
    if (busy && m.id === busy.job.id) {
      clearTimeout(busy.timer);
      const b = busy; busy = null;
      b.done(m);
      pump();
    }
  });
  w.on('exit', () => {
    if (w !== worker) return;
    worker = null;
    if (busy) { clearTimeout(busy.timer); const b = busy; busy = null; b.done({ status: 1, stdout: 'pdflatex-wasm: engine crashed' }); }
    startWorker();
  });
}

function pump() {
  if (!ready || busy || queue.length === 0) return;
  const item = queue.shift();
  busy = item;
  item.timer = setTimeout(() => {
    const b = busy; busy = null;
    const w = worker; worker = null;
    if (w) w.kill('SIGKILL');
    b.done({ status: 124, stdout: 'pdflatex-wasm: timeout' });
    startWorker();
  }, item.job.timeoutMs);
  worker.send(item.job);
}

function touch() {
  if (idleTimer) clearTimeout(idleTimer);
  idleTimer = setTimeout(() => { try { fs.unlinkSync(sock); } catch (e) {} process.exit(0); }, idleMs);
}

let nextId = 1;
const server = net.createServer((c) => {
  touch();
  let buf = '';
  c.on('data', (d) => {
    buf += d;
    const nl = buf.indexOf('\n');
    if (nl < 0) return;
    const req = JSON.parse(buf.slice(0, nl));
    req.id = nextId++;
    queue.push({ job: req, done: (r) => { c.end(JSON.stringify(r) + '\n'); touch(); } });
    pump();
  });
  c.on('error', () => {});
});
try { fs.unlinkSync(sock); } catch (e) {}
server.listen(sock, () => { startWorker(); touch(); });
