use leapgen::exact::*;
use leapgen::scheme::SchemeSpec;
use leapgen::series::ratio;
use num_traits::ToPrimitive;
use std::time::Instant;

fn main() {
    let spec = SchemeSpec::motzkin();
    let t0 = Instant::now();
    let we = WalkExact::new(&spec, 1001).unwrap();
    println!("q-series to 1001: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let mut acc = 0.0;
    for n in [999usize, 1000, 1001] {
        let d = we.tv_exact(n).to_f64().unwrap();
        println!("n={} sqrt(n) d = {:.6}", n, (n as f64).sqrt() * d);
        acc += (n as f64).sqrt() * d;
    }
    println!("mean = {:.6} target 0.42314 ({:?})", acc / 3.0, t0.elapsed());

    // rejection constant, float path
    let t0 = Instant::now();
    let a = ratio(1, 2);
    let mut acc = 0.0;
    for n in [1999usize, 2000, 2001] {
        let d = walk_tv_f64(&spec, n, &LawKind::Rej { r: 1, a: a.clone() });
        println!("n={} n*d_rej = {:.6}", n, n as f64 * d);
        acc += n as f64 * d;
    }
    println!("mean = {:.6} target 0.09074 ({:?})", acc / 3.0, t0.elapsed());

    // float vs rational at 1000
    let t0 = Instant::now();
    let tr = we.tv_rej_exact(1000, 1, &a).unwrap().to_f64().unwrap();
    let tf = walk_tv_f64(&spec, 1000, &LawKind::Rej { r: 1, a: a.clone() });
    println!("rej rational {:.16e} float {:.16e} diff {:.3e} ({:?})", tr, tf, (tr-tf).abs(), t0.elapsed());
    let tr = we.tv_exact(1000).to_f64().unwrap();
    let tf = walk_tv_f64(&spec, 1000, &LawKind::Leap);
    println!("tv rational {:.16e} float {:.16e} diff {:.3e}", tr, tf, (tr-tf).abs());

    // height law bracket
    let t0 = Instant::now();
    let ht = dyck_height_table(500);
    println!("height table 500: {:?}", t0.elapsed());
    let t0 = Instant::now();
    for n in (200..=1000).step_by(100) {
        let dh = tv_height(&we, &ht, n, &LawKind::Leap).unwrap().to_f64().unwrap();
        let d = we.tv_exact(n).to_f64().unwrap();
        println!("n={} n*dh = {:.5} (dh<=d: {})", n, n as f64 * dh, dh <= d);
    }
    println!("height laws: {:?}", t0.elapsed());

    // W_n -> a/mu at n=2000
    let law = walk_core_law_f64(&spec, 2000, &LawKind::Uniform);
    let leap = walk_core_law_f64(&spec, 2000, &LawKind::Leap);
    let mut w = 0.0;
    for (k, p) in &law.probs {
        let d = leap.prob(*k) / p.max(1e-300);
        let wk = leapgen::leap::rejection_weight(&spec, 1, 0.5, 2000, *k).unwrap();
        w += p * d * wk;
    }
    println!("W_2000 = {:.6} target a = 0.5 -> per-trial {:.6} target 1/6", w, w / 3.0);
}
