// Applies the node-hosting patches to the emscripten pdftex build shipped in
// the `texlive` npm package (v1.2.0). Usage: node patch.js <pdftex-worker.js>
const fs = require('fs');

const file = process.argv[2];
let src = fs.readFileSync(file, 'utf8');

const patches = [
  // lazy files must be read as bytes, not utf-8 strings
  ['a.k=H(e.read(a.url),!0)', 'a.k=e.readBinary(a.url)'],
  // stat() on a lazy file that has not been read yet
  ['Object.defineProperties(m,{C:{get:function(){return this.k.length}}})',
   'Object.defineProperties(m,{C:{get:function(){this.k||g.xc(this);return this.k.length}}})'],
  // expose FS and the sbrk top so the host can reset the heap between jobs
  ['e._memmove=yc;e._llvm_bswap_i32=zc;',
   'e.__FS=function(){return g};e.__getTop=function(){return u};e.__setTop=function(a){u=a};e._memmove=yc;e._llvm_bswap_i32=zc;'],
  // record the exit status of main()
  ['try{var h=e._main(c,d,0);Ud(h,!0)}catch(k){if(!(k instanceof ma))',
   'try{var h=e._main(c,d,0);e.__lastExit=h;Ud(h,!0)}catch(k){k instanceof ma&&(e.__lastExit=k.status);if(!(k instanceof ma))'],
];

for (const [from, to] of patches) {
  if (src.includes(to)) continue;
  const n = src.split(from).length - 1;
  if (n !== 1) {
    console.error(`patch anchor found ${n} times: ${from.slice(0, 60)}`);
    process.exit(1);
  }
  src = src.replace(from, to);
}
fs.writeFileSync(file, src);
