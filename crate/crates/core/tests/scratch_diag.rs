mod common;
use common::{embeddings_from_matrix, gaussian_blobs};
use polfield::manifold::{fit_umap, Metric, UmapParams};

#[test]
#[ignore]
fn diag_self_transform() {
    let (x, _) = gaussian_blobs(300, 64, 3, 1.0, 16.0, 51);
    let e = embeddings_from_matrix(x, "blobs64");
    let params = UmapParams {
        n_neighbors: 15,
        out_dims: 2,
        metric: Metric::Euclidean,
        ..UmapParams::default()
    };
    let p = fit_umap(&e, &params, 5).unwrap();
    let coords = p.transform(e.rows().view()).unwrap();
    let mut dists: Vec<(usize, f64)> = coords
        .outer_iter()
        .zip(p.coords().outer_iter())
        .enumerate()
        .map(|(i, (a, b))| {
            (i, polfield::num::euclidean(a.to_slice().unwrap(), b.to_slice().unwrap()) as f64)
        })
        .collect();
    dists.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("worst 10 drifts: {:?}", &dists[..10]);
    // blob layout scale for context
    let u = p.coords();
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in u.iter() {
        min_x = min_x.min(*v as f64);
        max_x = max_x.max(*v as f64);
    }
    println!("layout coordinate range: [{min_x:.2}, {max_x:.2}]");
    // nearest-neighbor distance stats in layout
    let mut nn = Vec::new();
    for i in 0..u.nrows() {
        let mut best = f64::INFINITY;
        for j in 0..u.nrows() {
            if i != j {
                let d = polfield::num::euclidean(
                    u.row(i).to_slice().unwrap(),
                    u.row(j).to_slice().unwrap(),
                ) as f64;
                best = best.min(d);
            }
        }
        nn.push(best);
    }
    nn.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("layout nn dist: min {:.3} median {:.3} max {:.3}", nn[0], nn[150], nn[299]);
}

#[test]
#[ignore]
fn diag_init_vs_refined() {
    use polfield::manifold::knn::k_nearest_external;
    let (x, _) = gaussian_blobs(300, 64, 3, 1.0, 16.0, 51);
    let e = embeddings_from_matrix(x, "blobs64");
    let params = UmapParams {
        n_neighbors: 15,
        out_dims: 2,
        metric: Metric::Euclidean,
        ..UmapParams::default()
    };
    let p = fit_umap(&e, &params, 5).unwrap();
    let u = p.coords();
    let rows: Vec<&[f32]> = (0..300).map(|i| e.rows().row(i).to_slice().unwrap()).collect();

    // replicate the weighted-mean init for every training row
    let mut worst_init = (0usize, 0.0f64);
    for i in 0..300 {
        let nb = k_nearest_external(&rows, rows[i], 15, Metric::Euclidean);
        let dists: Vec<f64> = nb.iter().map(|&(_, d)| d as f64).collect();
        let target = (nb.len() as f64).log2();
        let (rho, sigma) = polfield::manifold::fuzzy::smooth_knn_scale(&dists, target);
        let w: Vec<f64> = dists.iter().map(|&d| (-((d - rho).max(0.0)) / sigma).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut init = [0.0f64; 2];
        for (&(j, _), &wj) in nb.iter().zip(&w) {
            for d in 0..2 {
                init[d] += wj / total * u[[j, d]] as f64;
            }
        }
        let d = ((init[0] - u[[i, 0]] as f64).powi(2) + (init[1] - u[[i, 1]] as f64).powi(2)).sqrt();
        if d > worst_init.1 {
            worst_init = (i, d);
        }
    }
    println!("worst init drift: {:?}", worst_init);
}
