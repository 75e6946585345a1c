// Warm pdfTeX engine: loads the emscripten module once, snapshots its heap,
// and restores it before every compile so each job starts from a clean state.
const fs = require('fs');
const path = require('path');

let captured = [];
global.self = {
  postMessage(m) {
    const d = JSON.parse(m);
    if (d.command === 'stdout' || d.command === 'stderr') captured.push(d.contents);
  },
};
const realExit = process.exit.bind(process);
process.exit = function () {};

const base = __dirname;
const M = require('./pdftex-worker.js');
M.noExitRuntime = true;
{
  const lines = fs.readFileSync(path.join(base, 'texlive.lst'), 'utf8').split('\n');
  for (const line of lines) {
    const pos = line.lastIndexOf('/');
    const name = line.slice(pos + 1), dir = line.slice(0, pos);
    if (name === '.') M.FS_createPath('/', dir, true, true);
    else if (name.length) M.FS_createLazyFile(dir, name, path.join(base, 'texlive', dir, name), true, true);
  }
}
M.FS_createPath('/', 'job', true, true);
const FS = M.__FS();
M._free(M._malloc(16));
const heap = Uint8Array.from(M.HEAPU8);
const sp = M.Runtime.Wb();
const top = M.__getTop();

function listJob() {
  return FS.readdir('/job').filter((n) => n !== '.' && n !== '..');
}

// files: {name: Buffer}; returns {status, stdout, files: {name: Buffer}}
function compile(files, args) {
  M.HEAPU8.set(heap);
  M.Runtime.qb(sp);
  M.__setTop(top);
  for (const n of listJob()) FS.unlink('/job/' + n);
  for (const [n, buf] of Object.entries(files)) M.FS_createDataFile('/job', n, buf, true, true);
  FS.chdir('/job');
  captured = [];
  let status = 0;
  M.__lastExit = undefined;
  try {
    M.callMain(args);
    status = M.__lastExit === undefined ? 0 : M.__lastExit;
  } catch (e) {
    status = 1;
    captured.push('engine error: ' + e);
  }
  const out = {};
  for (const n of listJob()) {
    if (n in files) continue;
    out[n] = Buffer.from(FS.readFile('/job/' + n, { encoding: 'binary' }));
  }
  return { status, stdout: captured.join('\n'), files: out };
}

module.exports = { compile, realExit };
