// Child process hosting one warm engine; receives jobs over IPC.
const fs = require('fs');
const path = require('path');
const { compile, realExit } = require('./engine.js');

process.on('message', (job) => {
  let reply;
  try {
    const files = {};
    for (const [name, p] of Object.entries(job.inputs)) files[name] = fs.readFileSync(p);
    const realNow = Date.now;
    if (job.epoch != null) Date.now = () => job.epoch * 1000;
    let r;
    try {
      r = compile(files, job.args);
    } finally {
      Date.now = realNow;
    }
    fs.mkdirSync(job.outdir, { recursive: true });
    for (const [n, buf] of Object.entries(r.files)) fs.writeFileSync(path.join(job.outdir, n), buf);
    reply = { id: job.id, status: r.status, stdout: r.stdout };
  } catch (e) {
    reply = { id: job.id, status: 1, stdout: 'pdflatex-wasm: ' + e };
  }
  process.send(reply);
});
process.on('disconnect', () => realExit(0));
process.send({ ready: true });
