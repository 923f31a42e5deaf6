use gridfault::observability::{cluster_count, compute_ufc2};
use gridfault::simulator::{placed_benchmark, BenchmarkGrounding};

#[test]
fn benchmark_placement_counts() {
    let p = placed_benchmark(BenchmarkGrounding::Compensated).unwrap();
    let s = &p.solution;
    println!("{s:?}");
    assert_eq!((s.d_star, s.d1, s.d2, s.d3, s.d_bar, s.r_star), (48, 5, 2, 8, 58, 16));
    assert_eq!(compute_ufc2(&p.net).unwrap().r(), 16);
    assert_eq!(cluster_count(&p.net), 16);
    let t2 = &p.topologies[0];
    assert_eq!(compute_ufc2(t2).unwrap().r(), 16);
}
