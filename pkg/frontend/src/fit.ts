// Least-squares power-law fit on log-log coordinates, with the standard
// errors CI asserts on. F = amplitude * eps^exponent.

export interface PowerFit {
  exponent: number;
  exponentStderr: number;
  amplitude: number;
  amplitudeStderr: number;
  n: number;
}

export function powerLawFit(eps: number[], F: number[]): PowerFit {
  if (eps.length !== F.length) throw new Error("eps and F lengths differ");
  const pairs = eps
    .map((e, i) => [e, F[i]] as const)
    .filter(([e, f]) => e > 0 && f > 0);
  const n = pairs.length;
  if (n < 3) throw new Error(`need at least 3 positive points, got ${n}`);
  const x = pairs.map(([e]) => Math.log(e));
  const y = pairs.map(([, f]) => Math.log(f));
  const xbar = x.reduce((a, b) => a + b, 0) / n;
  const ybar = y.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (x[i] - xbar) ** 2;
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  const slope = sxy / sxx;
  const intercept = ybar - slope * xbar;
  let ssr = 0;
  for (let i = 0; i < n; i++) {
    ssr += (y[i] - intercept - slope * x[i]) ** 2;
  }
  // residual variance; 0 when the points are exactly collinear
  const s2 = n > 2 ? ssr / (n - 2) : 0;
  const slopeErr = Math.sqrt(s2 / sxx);
  const interceptErr = Math.sqrt(s2 * (1 / n + xbar ** 2 / sxx));
  const amplitude = Math.exp(intercept);
  return {
    exponent: slope,
    exponentStderr: slopeErr,
    amplitude,
    amplitudeStderr: amplitude * interceptErr,
    n,
  };
}
