//! Builtin kernels over application byte buffers.
//!
//! Calling conventions (all integers little-endian):
//!
//! | kernel                                   | arguments                                         |
//! |------------------------------------------|---------------------------------------------------|
//! | `nop`                                    | any                                               |
//! | `busy`                                   | duration ns (u32 or u64 slot), payload...         |
//! | `lfm_gen`                                | n, out                                            |
//! | `dft_naive` `idft_naive` `fft_radix2` `ifft` `accel_fft` `accel_ifft` | n, in, out           |
//! | `cmul` `cmul_conj`                       | n, a, b, out                                      |
//! | `max_corr`                               | n, corr, index, max_corr, lag, sampling_rate      |
//! | `scramble`                               | data, seed                                        |
//! | `delay`                                  | n, delay samples, src, dst                        |
//!
//! Transforms run at size `m = out bytes / 8`; the input contributes its
//! first `min(in samples, m)` samples and is zero-padded to `m`.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{dsp, KernelArgs, KernelEnv, KernelError, KernelHandle, OpSummary, Provider};

type Builtin = fn(&mut KernelArgs<'_>, &dyn KernelEnv) -> Result<(), KernelError>;

struct Entry {
    name: &'static str,
    func: Builtin,
    summary: Option<&'static str>,
}

const DFT_SUMMARY: &str = "add=1;br=2;call.cos=1;call.sin=1;fadd=3;fmul=6;fsub=1;icmp=1;load=4;mul=1;phi=2;store=2;udiv=1;uitofp=1;urem=2";
const IDFT_SUMMARY: &str = "add=1;br=2;call.cos=1;call.sin=1;fadd=2;fdiv=2;fmul=6;fsub=2;icmp=1;load=4;mul=1;phi=2;store=2;udiv=1;uitofp=1;urem=2";
const FFT_SUMMARY: &str =
    "add=3;br=4;fadd=3;fmul=4;fsub=3;icmp=3;load=6;lshr=1;phi=3;shl=1;store=4";
const CMUL_SUMMARY: &str = "add=1;br=2;fadd=1;fmul=4;fsub=1;icmp=1;load=4;phi=1;store=2";
const CMUL_CONJ_SUMMARY: &str =
    "add=1;br=2;fadd=1;fmul=4;fneg=1;fsub=1;icmp=1;load=4;phi=1;store=2";
const LFM_SUMMARY: &str =
    "add=1;br=2;call.cos=1;call.sin=1;fdiv=1;fmul=3;icmp=1;phi=1;store=2;uitofp=1";
const MAX_SUMMARY: &str = "add=1;br=3;fadd=1;fcmp=1;fmul=2;icmp=1;load=2;phi=3;select=2";
const SCRAMBLE_SUMMARY: &str = "and=3;br=4;icmp=2;load=1;lshr=3;or=2;phi=3;shl=2;store=1;xor=2";

const ENTRIES: &[Entry] = &[
    Entry {
        name: "accel_fft",
        func: fft_radix2,
        summary: Some(FFT_SUMMARY),
    },
    Entry {
        name: "accel_ifft",
        func: ifft,
        summary: None,
    },
    Entry {
        name: "busy",
        func: busy,
        summary: None,
    },
    Entry {
        name: "cmul",
        func: cmul,
        summary: Some(CMUL_SUMMARY),
    },
    Entry {
        name: "cmul_conj",
        func: cmul_conj,
        summary: Some(CMUL_CONJ_SUMMARY),
    },
    Entry {
        name: "delay",
        func: delay,
        summary: None,
    },
    Entry {
        name: "dft_naive",
        func: dft_naive,
        summary: Some(DFT_SUMMARY),
    },
    Entry {
        name: "fft_radix2",
        func: fft_radix2,
        summary: Some(FFT_SUMMARY),
    },
    Entry {
        name: "idft_naive",
        func: idft_naive,
        summary: Some(IDFT_SUMMARY),
    },
    Entry {
        name: "ifft",
        func: ifft,
        summary: None,
    },
    Entry {
        name: "lfm_gen",
        func: lfm_gen,
        summary: Some(LFM_SUMMARY),
    },
    Entry {
        name: "max_corr",
        func: max_corr,
        summary: Some(MAX_SUMMARY),
    },
    Entry {
        name: "nop",
        func: nop,
        summary: None,
    },
    Entry {
        name: "scramble",
        func: scramble,
        summary: Some(SCRAMBLE_SUMMARY),
    },
];

pub const BUILTIN_NAMES: &[&str] = &[
    "accel_fft",
    "accel_ifft",
    "busy",
    "cmul",
    "cmul_conj",
    "delay",
    "dft_naive",
    "fft_radix2",
    "idft_naive",
    "ifft",
    "lfm_gen",
    "max_corr",
    "nop",
    "scramble",
];

/// Declared operation summary of a builtin, if it has one.
pub fn builtin_summary(name: &str) -> Option<OpSummary> {
    ENTRIES
        .iter()
        .find(|e| e.name == name)
        .and_then(|e| e.summary)
        .and_then(OpSummary::parse)
}

pub(super) fn handle(name: &str) -> Option<KernelHandle> {
    let e = ENTRIES.iter().find(|e| e.name == name)?;
    let func = e.func;
    Some(KernelHandle {
        name: e.name.to_string(),
        provider: Provider::Builtin,
        fingerprint: e
            .summary
            .and_then(OpSummary::parse)
            .map(|s| s.fingerprint()),
        declared_cost: Default::default(),
        func: Arc::new(move |args: &mut KernelArgs<'_>, env: &dyn KernelEnv| func(args, env)),
    })
}

fn nop(_: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    Ok(())
}

fn busy(args: &mut KernelArgs<'_>, env: &dyn KernelEnv) -> Result<(), KernelError> {
    if args.is_empty() {
        args.expect_arity(1)?;
    }
    env.occupy(args.read_uint(0)?);
    Ok(())
}

fn lfm_gen(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    args.expect_arity(2)?;
    let n = args.read_u32(0)? as usize;
    args.write_complex(1, &dsp::lfm_chirp(n))
}

/// Input samples for a transform writing into argument `out`.
fn transform_input(
    args: &KernelArgs<'_>,
    input: usize,
    out: usize,
) -> Result<Vec<Complex64>, KernelError> {
    let m = args.complex_len(out);
    let take = args.complex_len(input).min(m);
    let mut x = args.read_complex(input, take)?;
    x.resize(m, Complex64::new(0.0, 0.0));
    Ok(x)
}

fn transform(
    args: &mut KernelArgs<'_>,
    f: impl FnOnce(Vec<Complex64>) -> Result<Vec<Complex64>, dsp::NotPowerOfTwo>,
) -> Result<(), KernelError> {
    args.expect_arity(3)?;
    args.read_u32(0)?;
    let x = transform_input(args, 1, 2)?;
    let y = f(x).map_err(|e| KernelError::NotPowerOfTwo {
        kernel: args.kernel().to_string(),
        n: e.0,
    })?;
    args.write_complex(2, &y)
}

fn dft_naive(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    transform(args, |x| Ok(dsp::dft_naive(&x)))
}

fn idft_naive(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    transform(args, |x| Ok(dsp::idft_naive(&x)))
}

fn fft_radix2(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    transform(args, |mut x| dsp::fft_radix2(&mut x).map(|_| x))
}

fn ifft(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    transform(args, |mut x| dsp::ifft(&mut x).map(|_| x))
}

fn pointwise(
    args: &mut KernelArgs<'_>,
    f: fn(&[Complex64], &[Complex64]) -> Vec<Complex64>,
) -> Result<(), KernelError> {
    args.expect_arity(4)?;
    args.read_u32(0)?;
    let m = args.complex_len(3);
    let a = args.read_complex(1, m)?;
    let b = args.read_complex(2, m)?;
    args.write_complex(3, &f(&a, &b))
}

fn cmul(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    pointwise(args, dsp::cmul)
}

fn cmul_conj(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    pointwise(args, dsp::cmul_conj)
}

fn max_corr(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    args.expect_arity(6)?;
    args.read_u32(0)?;
    let m = args.complex_len(1);
    let corr = args.read_complex(1, m)?;
    let (index, peak) = dsp::argmax_magnitude(&corr).ok_or_else(|| KernelError::Failed {
        kernel: args.kernel().to_string(),
        reason: "empty correlation buffer".to_string(),
    })?;
    let fs = args.read_f32(5)?;
    let lag = if fs > 0.0 {
        index as f32 / fs
    } else {
        index as f32
    };
    args.write_u32(2, index as u32)?;
    args.write_f32(3, peak as f32)?;
    args.write_f32(4, lag)
}

fn scramble(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    args.expect_arity(2)?;
    let seed = *args
        .bytes(1)
        .first()
        .ok_or_else(|| KernelError::BufferTooSmall {
            kernel: args.kernel().to_string(),
            index: 1,
            need: 1,
            have: 0,
        })?;
    dsp::scramble(args.bytes_mut(0), seed);
    Ok(())
}

fn delay(args: &mut KernelArgs<'_>, _: &dyn KernelEnv) -> Result<(), KernelError> {
    args.expect_arity(4)?;
    let n = args.read_u32(0)? as usize;
    let d = args.read_u32(1)? as usize;
    let take = n.min(args.complex_len(2));
    let src = args.read_complex(2, take)?;
    let out_len = args.complex_len(3);
    args.write_complex(3, &dsp::delay(&src, d, out_len))
}
