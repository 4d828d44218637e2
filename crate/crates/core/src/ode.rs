//! Classical fourth-order Runge-Kutta step on fixed-size states.

#[inline]
fn axpy<const N: usize>(x: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// One RK4 step of `dx/dt = f(t, x)`.
pub fn rk4_step<const N: usize, F>(f: &F, t: f64, x: &[f64; N], dt: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1));
    let k3 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2));
    let k4 = f(t + dt, &axpy(x, dt, &k3));
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// RK4 step for a fallible vector field. The first error aborts the step.
pub fn try_rk4_step<const N: usize, F, E>(
    f: &mut F,
    t: f64,
    x: &[f64; N],
    dt: f64,
) -> Result<[f64; N], E>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k1))?;
    let k3 = f(t + 0.5 * dt, &axpy(x, 0.5 * dt, &k2))?;
    let k4 = f(t + dt, &axpy(x, dt, &k3))?;
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}
