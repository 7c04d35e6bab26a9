use psax::codec::{fit, EncoderSpec, Method, Normalization};
use psax::metrics::{mindist, tlb};
use psax::series::TimeSeries;

fn main() -> psax::Result<()> {
    let training: Vec<f64> = (0..4000).map(|i| (i as f64 * 0.37).sin() * 2.0).collect();
    let spec = EncoderSpec::new(Method::Psax, 8, 16).with_normalization(Normalization::None);
    let encoder = fit(spec, &training)?;

    let u = TimeSeries::new((0..64).map(|i| (i as f64 * 0.2).sin()).collect())?;
    let s = TimeSeries::new((0..64).map(|i| (i as f64 * 0.2).cos()).collect())?;
    let a = encoder.encode(&u)?;
    let b = encoder.encode(&s)?;
    println!("symbols: {:?}", a.symbols());
    println!("mindist = {}", mindist(&a, &b)?);
    println!("tlb = {}", tlb(&u, &s, &encoder)?);
    Ok(())
}
