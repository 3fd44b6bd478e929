"use strict";
/** Detector backends served over the wire protocol.
 *
 * The echo backend returns a fixed configured payload (conformance tests);
 * the naive backend is a bright-marking scanner equivalent to the harness's
 * built-in classical detector: top-hat row response, thresholded sub-pixel
 * peaks, nearest-neighbor chaining, and a least-squares polynomial per side.
 */
Object.defineProperty(exports, "__esModule", { value: true });
exports.NaiveBackend = exports.EchoBackend = void 0;
class EchoBackend {
    family;
    inputW;
    inputH;
    gradient = true;
    coeffs;
    constructor(cfg = {}) {
        this.family = cfg.family ?? "poly";
        this.inputW = cfg.inputW ?? 320;
        this.inputH = cfg.inputH ?? 192;
        this.coeffs = cfg.coeffs ?? [
            [0.0, 0.0, 0.0, 120.0],
            [0.0, 0.0, 0.0, 200.0],
        ];
        if (this.family !== "poly") {
            throw new Error("echo backend serves the poly family");
        }
    }
    detect(_image) {
        return { coeffs: this.coeffs };
    }
    gradientValues(_image, mask) {
        let n = 0;
        for (const v of mask.data)
            if (v > 0)
                n++;
        return new Array(n).fill(0);
    }
}
exports.EchoBackend = EchoBackend;
class NaiveBackend {
    family = "poly";
    inputW;
    inputH;
    gradient = false;
    thr;
    window;
    smoothRows;
    maxGap;
    dxPerRow;
    minRows;
    spanFrac;
    constructor(cfg = {}) {
        this.inputW = cfg.inputW ?? 320;
        this.inputH = cfg.inputH ?? 192;
        this.thr = cfg.responseThreshold ?? 25.0;
        this.window = cfg.localMeanWindow ?? 21;
        this.smoothRows = cfg.smoothRows ?? 3;
        this.maxGap = cfg.maxRowGap ?? 3;
        this.dxPerRow = cfg.chainDxPerRow ?? 5.0;
        this.minRows = cfg.minRows ?? 8;
        this.spanFrac = cfg.fullFitSpanFrac ?? 0.55;
    }
    detect(image) {
        if (image.width !== this.inputW || image.height !== this.inputH) {
            throw new Error(`image ${image.width}x${image.height} does not match detector ` +
                `input ${this.inputW}x${this.inputH}`);
        }
        const resp = this.response(image);
        const chains = this.chain(this.rowPeaks(resp, image.width, image.height));
        const kept = chains.filter((c) => c.rows.length >= this.minRows);
        const coeffs = this.selectAndFit(kept);
        return { coeffs };
    }
    gradientValues() {
        throw new Error("naive backend serves no gradients");
    }
    /** Vertical box smoothing then per-row top-hat response. */
    response(image) {
        const { width: w, height: h, data } = image;
        const smooth = new Float64Array(w * h);
        const half = Math.floor(this.smoothRows / 2);
        for (let r = 0; r < h; r++) {
            for (let c = 0; c < w; c++) {
                let acc = 0;
                for (let dr = -half; dr <= half; dr++) {
                    const rr = Math.min(h - 1, Math.max(0, r + dr));
                    acc += data[rr * w + c];
                }
                smooth[r * w + c] = acc / this.smoothRows;
            }
        }
        const resp = new Float64Array(w * h);
        const pad = Math.floor(this.window / 2);
        for (let r = 0; r < h; r++) {
            // Sliding local mean with edge clamping via prefix sums.
            const prefix = new Float64Array(w + 1);
            for (let c = 0; c < w; c++) {
                prefix[c + 1] = prefix[c] + smooth[r * w + c];
            }
            for (let c = 0; c < w; c++) {
                let acc = 0;
                const lo = c - pad;
                const hi = c + pad;
                const loIn = Math.max(0, lo);
                const hiIn = Math.min(w - 1, hi);
                acc = prefix[hiIn + 1] - prefix[loIn];
                acc += Math.max(0, -lo) * smooth[r * w]; // clamp left edge
                acc += Math.max(0, hi - (w - 1)) * smooth[r * w + w - 1];
                resp[r * w + c] = smooth[r * w + c] - acc / this.window;
            }
        }
        return resp;
    }
    rowPeaks(resp, w, h) {
        const peaks = [];
        for (let r = 0; r < h; r++) {
            for (let c = 1; c < w - 1; c++) {
                const v = resp[r * w + c];
                if (v < this.thr)
                    continue;
                const left = resp[r * w + c - 1];
                const right = resp[r * w + c + 1];
                if (!(v > left && v >= right))
                    continue;
                const denom = left - 2 * v + right;
                let frac = 0;
                if (denom < -1e-12)
                    frac = 0.5 * (left - right) / denom;
                frac = Math.min(0.5, Math.max(-0.5, frac));
                peaks.push([r, c + frac]);
            }
        }
        return peaks;
    }
    chain(peaks) {
        const open = [];
        const closed = [];
        let i = 0;
        while (i < peaks.length) {
            const row = peaks[i][0];
            let j = i;
            while (j < peaks.length && peaks[j][0] === row)
                j++;
            for (let k = open.length - 1; k >= 0; k--) {
                if (row - open[k].lastRow > this.maxGap) {
                    closed.push(open[k]);
                    open.splice(k, 1);
                }
            }
            const claimed = new Set();
            for (let k = i; k < j; k++) {
                const x = peaks[k][1];
                let best = null;
                let bestDx = Infinity;
                for (const chain of open) {
                    if (claimed.has(chain))
                        continue;
                    const gap = row - chain.lastRow;
                    if (gap <= 0)
                        continue;
                    const dx = Math.abs(x - chain.lastX);
                    if (dx > this.dxPerRow * gap)
                        continue;
                    if (dx < bestDx) {
                        best = chain;
                        bestDx = dx;
                    }
                }
                if (best === null) {
                    open.push({ lastRow: row, lastX: x, rows: [row], xs: [x] });
                }
                else {
                    claimed.add(best);
                    best.lastRow = row;
                    best.lastX = x;
                    best.rows.push(row);
                    best.xs.push(x);
                }
            }
            i = j;
        }
        closed.push(...open);
        return closed;
    }
    selectAndFit(chains) {
        if (chains.length === 0)
            return [];
        const center = this.inputW / 2;
        let left = null;
        let right = null;
        for (const chain of chains) {
            const bottomX = chain.xs[chain.xs.length - 1];
            if (bottomX < center) {
                if (left === null || bottomX > left.xs[left.xs.length - 1])
                    left = chain;
            }
            else if (right === null || bottomX < right.xs[right.xs.length - 1]) {
                right = chain;
            }
        }
        const out = [];
        for (const chain of [left, right]) {
            if (chain !== null)
                out.push(this.fit(chain));
        }
        return out;
    }
    /** Least squares in normalized y, emitted highest-degree-first in pixels. */
    fit(chain) {
        let deg = Math.min(3, chain.rows.length - 1);
        const span = Math.max(...chain.rows) - Math.min(...chain.rows);
        if (span < this.spanFrac * (this.inputH / 2))
            deg = 1;
        const scale = this.inputH;
        const n = chain.rows.length;
        const cols = deg + 1;
        // Normal equations for the Vandermonde system in u = y / scale.
        const ata = Array.from({ length: cols }, () => new Float64Array(cols));
        const atb = new Float64Array(cols);
        for (let k = 0; k < n; k++) {
            const u = chain.rows[k] / scale;
            const powers = new Float64Array(cols);
            for (let p = 0; p < cols; p++)
                powers[p] = Math.pow(u, deg - p);
            for (let a = 0; a < cols; a++) {
                atb[a] += powers[a] * chain.xs[k];
                for (let b = 0; b < cols; b++)
                    ata[a][b] += powers[a] * powers[b];
            }
        }
        const sol = solve(ata, atb);
        const pixel = new Array(4).fill(0);
        for (let p = 0; p < cols; p++) {
            pixel[4 - cols + p] = sol[p] / Math.pow(scale, deg - p);
        }
        return pixel;
    }
}
exports.NaiveBackend = NaiveBackend;
/** Gaussian elimination with partial pivoting on a small dense system. */
function solve(a, b) {
    const n = b.length;
    const m = a.map((row, i) => {
        const out = new Float64Array(n + 1);
        out.set(row);
        out[n] = b[i];
        return out;
    });
    for (let col = 0; col < n; col++) {
        let pivot = col;
        for (let r = col + 1; r < n; r++) {
            if (Math.abs(m[r][col]) > Math.abs(m[pivot][col]))
                pivot = r;
        }
        [m[col], m[pivot]] = [m[pivot], m[col]];
        const diag = m[col][col];
        if (Math.abs(diag) < 1e-14)
            continue;
        for (let r = 0; r < n; r++) {
            if (r === col)
                continue;
            const factor = m[r][col] / diag;
            for (let c = col; c <= n; c++)
                m[r][c] -= factor * m[col][c];
        }
    }
    const x = new Float64Array(n);
    for (let i = 0; i < n; i++) {
        x[i] = Math.abs(m[i][i]) < 1e-14 ? 0 : m[i][n] / m[i][i];
    }
    return x;
}
