mod common;

use common::{conv, deconv, gdn, map, max_abs_diff, plane};
use croi::codec::HyperpriorCodec;
use croi::nn::{Graph, ParamStore, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn codec(n: usize, m: usize, seed: u64) -> (ParamStore<f64>, HyperpriorCodec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let c = HyperpriorCodec::new(&mut store, "codec", n, m, &mut rng);
    // Non-trivial GDN parameters so the oracle exercises the cross terms.
    for id in store.ids().collect::<Vec<_>>() {
        if store.name(id).contains("gdn") {
            store.get_mut(id).data_mut().iter_mut().for_each(|v| *v += rng.gen_range(0.0..0.2));
        }
    }
    (store, c)
}

#[test]
fn analysis_matches_direct_loops() {
    let (store, c) = codec(4, 3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Tensor::from_fn([3, 32, 32], |_, _, _| rng.gen_range(0.0..1.0));
    let mut g = Graph::new(&store);
    let xv = g.input(x.clone());
    let (f, y) = c.analysis(&mut g, xv).unwrap();

    let mut t = plane(&x);
    for i in 0..4 {
        t = conv(&t, &store, &format!("codec.g_a.conv{i}"), 5, 2);
        if i < 3 {
            t = gdn(&t, &store, &format!("codec.g_a.gdn{i}"), false);
        }
    }
    assert!(max_abs_diff(&t, g.value(f)) < 1e-10);
    let y_ref = conv(&t, &store, "codec.g_a.out", 3, 1);
    assert!(max_abs_diff(&y_ref, g.value(y)) < 1e-10);
}

#[test]
fn delta_input_response() {
    let (store, c) = codec(2, 2, 2);
    let x = Tensor::from_fn([3, 16, 16], |ch, h, w| if ch == 1 && h == 7 && w == 8 { 1.0 } else { 0.0 });
    let mut g = Graph::new(&store);
    let xv = g.input(x.clone());
    let (_, y) = c.analysis(&mut g, xv).unwrap();
    assert_eq!(g.shape(y), [2, 1, 1]);
    let mut t = plane(&x);
    for i in 0..4 {
        t = conv(&t, &store, &format!("codec.g_a.conv{i}"), 5, 2);
        if i < 3 {
            t = gdn(&t, &store, &format!("codec.g_a.gdn{i}"), false);
        }
    }
    let y_ref = conv(&t, &store, "codec.g_a.out", 3, 1);
    assert!(max_abs_diff(&y_ref, g.value(y)) < 1e-12);
}

#[test]
fn synthesis_matches_direct_loops() {
    let (store, c) = codec(4, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = Tensor::from_fn([4, 2, 3], |_, _, _| rng.gen_range(-2.0..2.0));
    let mut g = Graph::new(&store);
    let yv = g.input(y.clone());
    let x_hat = c.synthesis(&mut g, yv).unwrap();
    assert_eq!(g.shape(x_hat), [3, 32, 48]);
    let mut t = plane(&y);
    for i in 0..4 {
        t = deconv(&t, &store, &format!("codec.g_s.deconv{i}"), 5, 2);
        if i < 3 {
            t = gdn(&t, &store, &format!("codec.g_s.igdn{i}"), true);
        }
    }
    assert!(max_abs_diff(&t, g.value(x_hat)) < 1e-10);
}

#[test]
fn zero_latent_decodes_to_bias_image() {
    let (store, c) = codec(4, 3, 5);
    let mut g = Graph::new(&store);
    let y = g.input(Tensor::zeros([4, 1, 1]));
    let x_hat = c.synthesis(&mut g, y).unwrap();
    let mut t = vec![vec![vec![0.0; 1]; 1]; 4];
    for i in 0..4 {
        t = deconv(&t, &store, &format!("codec.g_s.deconv{i}"), 5, 2);
        if i < 3 {
            t = gdn(&t, &store, &format!("codec.g_s.igdn{i}"), true);
        }
    }
    assert!(max_abs_diff(&t, g.value(x_hat)) < 1e-12);
}

#[test]
fn hyper_path_matches_direct_loops() {
    let (store, c) = codec(4, 3, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y = Tensor::from_fn([4, 4, 8], |_, _, _| rng.gen_range(-3.0..3.0));
    let mut g = Graph::new(&store);
    let yv = g.input(y.clone());
    let z = c.hyper_analysis(&mut g, yv).unwrap();
    let relu = |v: f64| v.max(0.0);
    let mut t = conv(&plane(&y), &store, "codec.h_a.conv0", 3, 1);
    t = conv(&map(&t, relu), &store, "codec.h_a.conv1", 5, 2);
    t = conv(&map(&t, relu), &store, "codec.h_a.conv2", 5, 2);
    assert!(max_abs_diff(&t, g.value(z)) < 1e-10);

    let (mean, scale) = c.hyper_synthesis(&mut g, z).unwrap();
    let mut u = deconv(&t, &store, "codec.h_s.deconv0", 5, 2);
    u = deconv(&map(&u, relu), &store, "codec.h_s.deconv1", 5, 2);
    let out = conv(&map(&u, relu), &store, "codec.h_s.out", 3, 1);
    let mean_ref: Vec<_> = out[..4].to_vec();
    let scale_ref = map(&out[4..].to_vec(), |v| (v.exp().ln_1p()).max(0.01));
    assert!(max_abs_diff(&mean_ref, g.value(mean)) < 1e-10);
    assert!(max_abs_diff(&scale_ref, g.value(scale)) < 1e-10);
}

#[test]
fn scale_floor_applies() {
    let (mut store, c) = codec(4, 3, 8);
    let id = store.find("codec.h_s.out.bias").unwrap();
    store.get_mut(id).data_mut()[4..].fill(-50.0);
    let w = store.find("codec.h_s.out.weight").unwrap();
    store.get_mut(w).data_mut().fill(0.0);
    let mut g = Graph::new(&store);
    let z = g.input(Tensor::full([3, 1, 1], 1.0));
    let (_, scale) = c.hyper_synthesis(&mut g, z).unwrap();
    assert!(g.value(scale).data().iter().all(|&s| s == 0.01));
}

#[test]
fn shape_errors() {
    let (store, c) = codec(4, 3, 9);
    let mut g = Graph::new(&store);
    let x = g.input(Tensor::zeros([3, 24, 32]));
    assert!(c.analysis(&mut g, x).is_err());
    let y = g.input(Tensor::zeros([4, 2, 4]));
    assert!(c.hyper_analysis(&mut g, y).is_err());
    let wrong = g.input(Tensor::zeros([5, 1, 1]));
    assert!(c.synthesis(&mut g, wrong).is_err());
}
