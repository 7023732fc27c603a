//! Finite-difference checks for every layer and both networks.
#![allow(dead_code)]

use fedleak::models::{
    DiscriminatorNet, DiscriminatorWidths, GeneratorNet, GeneratorWidths, ParamSet, NOISE_DIM,
};
use fedleak::tensor::{
    conv2d, conv2d_backward, conv_transpose2d, conv_transpose2d_backward, linear, linear_backward, relu,
    relu_backward, softmax_cross_entropy, tanh, tanh_backward,
};
use fedleak::Tensor;

use super::{central_differences, cross_entropy_f64, random, rng, sample_coords, weighted_sum, FdReport, FD_STEP};

pub fn conv2d_report(seed: u64) -> FdReport {
    let mut r = rng(seed);
    let mut total = FdReport::default();
    for &(ci, co, h, s, p) in &[(2, 3, 5, 2, 1), (1, 2, 6, 1, 1), (3, 2, 4, 1, 0)] {
        let mut x = random(&[ci, h, h], &mut r);
        let mut k = random(&[co, ci, 3, 3], &mut r);
        let mut b = random(&[co], &mut r);
        let y = conv2d(&x, &k, &b, s, p).unwrap();
        let w = random(y.shape(), &mut r);
        let g = conv2d_backward(&w, &x, &k, s, p).unwrap();

        let (kc, bc) = (k.clone(), b.clone());
        let coords: Vec<usize> = (0..x.len()).collect();
        let gi = g.input.data().to_vec();
        let xs = x.shape().to_vec();
        total = total.merge(central_differences(x.data_mut(), &gi, &coords, |v| {
            let xt = Tensor::new(xs.clone(), v.to_vec()).unwrap();
            weighted_sum(&conv2d(&xt, &kc, &bc, s, p).unwrap(), &w)
        }));
        let xc = x.clone();
        let coords: Vec<usize> = (0..k.len()).collect();
        let ks = k.shape().to_vec();
        total = total.merge(central_differences(k.data_mut(), g.kernel.data(), &coords, |v| {
            let kt = Tensor::new(ks.clone(), v.to_vec()).unwrap();
            weighted_sum(&conv2d(&xc, &kt, &bc, s, p).unwrap(), &w)
        }));
        let coords: Vec<usize> = (0..b.len()).collect();
        total = total.merge(central_differences(b.data_mut(), g.bias.data(), &coords, |v| {
            weighted_sum(&conv2d(&xc, &kc, &Tensor::vector(v.to_vec()), s, p).unwrap(), &w)
        }));
    }
    total
}

pub fn conv_transpose2d_report(seed: u64) -> FdReport {
    let mut r = rng(seed);
    let mut total = FdReport::default();
    for &(ci, co, h, s, p, op) in &[(2, 3, 3, 2, 1, 1), (3, 1, 4, 1, 1, 0), (1, 2, 3, 2, 0, 1)] {
        let mut x = random(&[ci, h, h], &mut r);
        let mut k = random(&[ci, co, 3, 3], &mut r);
        let mut b = random(&[co], &mut r);
        let y = conv_transpose2d(&x, &k, &b, s, p, op).unwrap();
        let w = random(y.shape(), &mut r);
        let g = conv_transpose2d_backward(&w, &x, &k, s, p, op).unwrap();

        let (kc, bc) = (k.clone(), b.clone());
        let xs = x.shape().to_vec();
        let coords: Vec<usize> = (0..x.len()).collect();
        let gi = g.input.data().to_vec();
        total = total.merge(central_differences(x.data_mut(), &gi, &coords, |v| {
            let xt = Tensor::new(xs.clone(), v.to_vec()).unwrap();
            weighted_sum(&conv_transpose2d(&xt, &kc, &bc, s, p, op).unwrap(), &w)
        }));
        let xc = x.clone();
        let ks = k.shape().to_vec();
        let coords: Vec<usize> = (0..k.len()).collect();
        total = total.merge(central_differences(k.data_mut(), g.kernel.data(), &coords, |v| {
            let kt = Tensor::new(ks.clone(), v.to_vec()).unwrap();
            weighted_sum(&conv_transpose2d(&xc, &kt, &bc, s, p, op).unwrap(), &w)
        }));
        let coords: Vec<usize> = (0..b.len()).collect();
        total = total.merge(central_differences(b.data_mut(), g.bias.data(), &coords, |v| {
            weighted_sum(&conv_transpose2d(&xc, &kc, &Tensor::vector(v.to_vec()), s, p, op).unwrap(), &w)
        }));
    }
    total
}

pub fn linear_report(seed: u64) -> FdReport {
    let mut r = rng(seed);
    let mut x = random(&[7], &mut r);
    let mut wt = random(&[5, 7], &mut r);
    let mut b = random(&[5], &mut r);
    let w = random(&[5], &mut r);
    let g = linear_backward(&w, &x, &wt).unwrap();
    let (wc, bc) = (wt.clone(), b.clone());
    let mut total = central_differences(x.data_mut(), g.input.data(), &(0..7).collect::<Vec<_>>(), |v| {
        weighted_sum(&linear(&Tensor::vector(v.to_vec()), &wc, &bc).unwrap(), &w)
    });
    let xc = x.clone();
    total = total.merge(central_differences(wt.data_mut(), g.weight.data(), &(0..35).collect::<Vec<_>>(), |v| {
        weighted_sum(&linear(&xc, &Tensor::new([5, 7], v.to_vec()).unwrap(), &bc).unwrap(), &w)
    }));
    total.merge(central_differences(b.data_mut(), g.bias.data(), &(0..5).collect::<Vec<_>>(), |v| {
        weighted_sum(&linear(&xc, &wc, &Tensor::vector(v.to_vec())).unwrap(), &w)
    }))
}

pub fn activations_report(seed: u64) -> FdReport {
    let mut r = rng(seed);
    // Points within 1e-4 of the ReLU kink are excluded; the step itself must
    // not cross the kink either.
    let raw = random(&[40], &mut r);
    let mut x = Tensor::vector(
        raw.data()
            .iter()
            .filter(|v| v.abs() > 2.0 * FD_STEP.max(1e-4))
            .copied()
            .collect(),
    );
    let w = random(x.shape(), &mut r);
    let n = x.len();
    let g = relu_backward(&w, &x).unwrap();
    let coords: Vec<usize> = (0..n).collect();
    let relu_rep = central_differences(x.data_mut(), g.data(), &coords, |v| {
        weighted_sum(&relu(&Tensor::vector(v.to_vec())), &w)
    });
    let y = tanh(&x);
    let g = tanh_backward(&w, &y).unwrap();
    let tanh_rep = central_differences(x.data_mut(), g.data(), &coords, |v| {
        weighted_sum(&tanh(&Tensor::vector(v.to_vec())), &w)
    });
    relu_rep.merge(tanh_rep)
}

pub fn cross_entropy_report(seed: u64) -> FdReport {
    let mut r = rng(seed);
    let mut logits = random(&[11], &mut r);
    logits.data_mut().iter_mut().for_each(|v| *v *= 3.0);
    let (_, g) = softmax_cross_entropy(&logits, 4).unwrap();
    central_differences(logits.data_mut(), g.data(), &(0..11).collect::<Vec<_>>(), |v| {
        softmax_cross_entropy(&Tensor::vector(v.to_vec()), 4).unwrap().0 as f64
    })
}

pub const TINY_DISCRIMINATOR: DiscriminatorWidths = DiscriminatorWidths {
    conv1: 2,
    conv2: 3,
    hidden: 6,
};

pub const TINY_GENERATOR: GeneratorWidths = GeneratorWidths {
    planes: 2,
    deconv1: 3,
    deconv2: 4,
};

fn perturb_params(
    params: &ParamSet,
    grads: &ParamSet,
    per_tensor: usize,
    seed: u64,
    mut objective: impl FnMut(&ParamSet) -> f64,
) -> FdReport {
    let mut r = rng(seed);
    let mut total = FdReport::default();
    let mut work = params.clone();
    for idx in 0..params.len() {
        let len = params.tensor(idx).len();
        let coords = sample_coords(len, per_tensor, &mut r);
        let analytic = grads.tensor(idx).data().to_vec();
        let mut values = params.tensor(idx).data().to_vec();
        total = total.merge(central_differences(&mut values, &analytic, &coords, |v| {
            work.tensor_mut(idx).data_mut().copy_from_slice(v);
            objective(&work)
        }));
        work.tensor_mut(idx).data_mut().copy_from_slice(params.tensor(idx).data());
    }
    total
}

/// Cross-entropy of the classifier against class 3, gradients w.r.t. every
/// parameter tensor and the input image.
pub fn discriminator_report(widths: DiscriminatorWidths, per_tensor: usize, seed: u64) -> FdReport {
    let mut r = rng(seed);
    let net = DiscriminatorNet::with_widths(widths, &mut r);
    let mut image = random(&[1, 28, 28], &mut r);
    let target = 3;
    let loss_of = |net: &DiscriminatorNet, img: &Tensor| {
        cross_entropy_f64(&net.logits(img).unwrap(), target)
    };
    let (logits, tape) = net.forward(&image).unwrap();
    let (_, g) = softmax_cross_entropy(&logits, target).unwrap();
    let mut grads = net.params().zeros_like();
    let g_in = net.backward(tape, &g, Some(&mut grads), true).unwrap().unwrap();

    let img_c = image.clone();
    let report = perturb_params(net.params(), &grads, per_tensor, seed + 1, |p| {
        loss_of(&DiscriminatorNet::from_params_with(widths, p.clone()).unwrap(), &img_c)
    });
    let coords = sample_coords(image.len(), per_tensor, &mut r);
    report.merge(central_differences(image.data_mut(), g_in.data(), &coords, |v| {
        loss_of(&net, &Tensor::new([1, 28, 28], v.to_vec()).unwrap())
    }))
}

/// Weighted sum of the generated image, gradients w.r.t. parameters and noise.
pub fn generator_report(widths: GeneratorWidths, per_tensor: usize, seed: u64) -> FdReport {
    let mut r = rng(seed);
    let net = GeneratorNet::with_widths(widths, &mut r);
    let mut z = random(&[NOISE_DIM], &mut r);
    let w = random(&[1, 28, 28], &mut r);
    let (_, tape) = net.forward(&z).unwrap();
    let mut grads = net.params().zeros_like();
    let gz = net.backward(tape, &w, Some(&mut grads), true).unwrap().unwrap();

    let zc = z.clone();
    let report = perturb_params(net.params(), &grads, per_tensor, seed + 1, |p| {
        let mut g = GeneratorNet::with_widths(widths, &mut rng(0));
        *g.params_mut() = p.clone();
        weighted_sum(&g.generate(&zc).unwrap(), &w)
    });
    let coords = sample_coords(NOISE_DIM, per_tensor, &mut r);
    report.merge(central_differences(z.data_mut(), gz.data(), &coords, |v| {
        weighted_sum(&net.generate(&Tensor::vector(v.to_vec())).unwrap(), &w)
    }))
}

/// The attack objective: cross-entropy of D(G(z)) toward the target class,
/// differentiated through the frozen discriminator into the generator.
pub fn end_to_end_report(per_tensor: usize, seed: u64) -> FdReport {
    let mut r = rng(seed);
    let d = DiscriminatorNet::with_widths(TINY_DISCRIMINATOR, &mut r);
    let g = GeneratorNet::with_widths(TINY_GENERATOR, &mut r);
    let z = random(&[NOISE_DIM], &mut r);
    let target = 1;
    let (img, gtape) = g.forward(&z).unwrap();
    let (logits, dtape) = d.forward(&img).unwrap();
    let (_, gl) = softmax_cross_entropy(&logits, target).unwrap();
    let g_img = d.backward(dtape, &gl, None, true).unwrap().unwrap();
    let mut grads = g.params().zeros_like();
    g.backward(gtape, &g_img, Some(&mut grads), false).unwrap();

    perturb_params(g.params(), &grads, per_tensor, seed + 1, |p| {
        let mut gen = g.clone();
        *gen.params_mut() = p.clone();
        let img = gen.generate(&z).unwrap();
        cross_entropy_f64(&d.logits(&img).unwrap(), target)
    })
}
