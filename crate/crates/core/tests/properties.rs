use blv_core::bl::{self, ExponentVector, SubsetKind, SubsetTerm};
use blv_core::geo::{self, jacobi, AntisymmetricMatrix, SubspaceKind, SubspaceSpec};
use blv_core::quotient::check_commutation;
use blv_core::rational::{rat, Rational};
use blv_core::verify::{self, TestFamily};
use blv_core::zoo::{self, slice, symmetric, GroupTable, Homomorphism};
use blv_core::{rng, FactorMap, FiniteMarkovModel};
use nalgebra::DMatrix;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use std::sync::OnceLock;

fn s4() -> &'static (FiniteMarkovModel, Vec<FactorMap>) {
    static CELL: OnceLock<(FiniteMarkovModel, Vec<FactorMap>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = zoo::symmetric_group_model(4).unwrap();
        let maps = symmetric::coordinate_maps(&m).unwrap();
        (m, maps)
    })
}

fn slice63() -> &'static (FiniteMarkovModel, Vec<FactorMap>) {
    static CELL: OnceLock<(FiniteMarkovModel, Vec<FactorMap>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = zoo::slice_model(6, 3).unwrap();
        let maps = slice::coordinate_maps(&m).unwrap();
        (m, maps)
    })
}

fn subset_of(n: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::sample::subsequence((1..=n).collect::<Vec<_>>(), 1..=n)
}

fn exponents(m: usize) -> impl Strategy<Value = Vec<Rational>> {
    proptest::collection::vec((0i64..=12).prop_map(|v| rat(v, 12)), m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimized_exponents_pass_the_criterion(w in proptest::collection::vec(1i64..10, 4)) {
        let (model, maps) = s4();
        let system = bl::edge_active_sets(model, maps).unwrap();
        let weights: Vec<Rational> = w.iter().map(|&v| rat(v, 1)).collect();
        let opt = bl::optimize_exponents(&system, &weights).unwrap();
        prop_assert!(bl::check_edge_criterion(&system, &opt.c).unwrap().pass);
        let half_obj: Rational = weights.iter().map(|v| v * rat(1, 2)).sum();
        prop_assert!(opt.objective >= half_obj);
    }

    #[test]
    fn criterion_is_monotone_under_lowering(c in exponents(6), cut in proptest::collection::vec(0i64..=3, 6)) {
        let (model, maps) = slice63();
        let system = bl::edge_active_sets(model, maps).unwrap();
        let hi = ExponentVector::new(c.clone()).unwrap();
        let lo_vals: Vec<Rational> = c.iter().zip(&cut).map(|(v, k)| v * rat(3 - k, 3)).collect();
        let lo = ExponentVector::new(lo_vals).unwrap();
        if bl::check_edge_criterion(&system, &hi).unwrap().pass {
            prop_assert!(bl::check_edge_criterion(&system, &lo).unwrap().pass);
        }
    }

    #[test]
    fn passing_exponents_give_nonnegative_gaps(c in exponents(4), seed in 0u64..1000) {
        let (model, maps) = s4();
        let system = bl::edge_active_sets(model, maps).unwrap();
        let cv = ExponentVector::new(c).unwrap();
        prop_assume!(bl::check_edge_criterion(&system, &cv).unwrap().pass);
        let family = TestFamily::log_normal(maps, seed, 0);
        let gap = verify::global_gap(model, maps, &cv.to_f64(), &family).unwrap();
        prop_assert!(gap >= -1e-12, "gap {gap}");
    }

    #[test]
    fn restriction_and_image_maps_commute(set in subset_of(4)) {
        let (model, _) = s4();
        let r = zoo::restriction_map(model, &set).unwrap();
        let i = zoo::image_map(model, &set).unwrap();
        prop_assert!(check_commutation(model, &r).unwrap().commutes);
        prop_assert!(check_commutation(model, &i).unwrap().commutes);
    }

    #[test]
    fn jacobi_matches_reference_solver(n in 1usize..9, seed in 0u64..10_000) {
        let mut rng = rng::stream_rng(seed, 0);
        let g = DMatrix::from_vec(n, n, rng::normals(&mut rng, n * n));
        let sym = &g + g.transpose();
        let ours = jacobi::symmetric_eigenvalues(&sym).unwrap();
        let mut reference: Vec<f64> = sym.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&reference) {
            prop_assert!((a - b).abs() < 1e-9, "{ours:?} vs {reference:?}");
        }
    }

    #[test]
    fn lie_projection_norm_identity(n in 3usize..9, k_frac in 0.0f64..1.0, stab in any::<bool>(), seed in 0u64..10_000) {
        let mut rng = rng::stream_rng(seed, 1);
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let kind = if stab { SubspaceKind::Stab } else { SubspaceKind::Fix };
        let spec = SubspaceSpec::random(&mut rng, n, k, kind).unwrap();
        let a = AntisymmetricMatrix::random(&mut rng, n);
        prop_assert!(geo::norm_identity_residual(&spec, &a).unwrap() <= 1e-10);
        let proj = geo::lie_projection(&spec, &a).unwrap();
        let again = geo::lie_projection(&spec, &proj).unwrap();
        prop_assert!((proj.matrix() - again.matrix()).norm() <= 1e-10);
    }

    #[test]
    fn pair_condition_matches_coordinate_lift(
        n in 2usize..6,
        raw in proptest::collection::vec((proptest::collection::vec(any::<bool>(), 5), any::<bool>(), 0i64..=6), 1..5),
    ) {
        let family: Vec<SubsetTerm> = raw
            .iter()
            .filter_map(|(bits, image, c)| {
                let set: Vec<usize> = (1..=n).filter(|&i| bits[i - 1]).collect();
                (!set.is_empty()).then(|| SubsetTerm {
                    set,
                    kind: if *image { SubsetKind::Image } else { SubsetKind::Restriction },
                    c: rat(*c, 6),
                })
            })
            .collect();
        prop_assume!(!family.is_empty());
        let pair = bl::pair_condition_check(n, &family).unwrap();
        let lift = geo::coordinate_family_lift(n, &family).unwrap();
        let expected = 1.0 - pair.max_sum.to_f64().unwrap();
        prop_assert!((lift.lambda_min - expected).abs() < 1e-10);
        prop_assert_eq!(lift.pass, pair.pass);
    }

    #[test]
    fn cyclic_active_sets_follow_generators(n in 3usize..13, g in 1usize..12) {
        let g = 1 + g % (n - 1);
        let group = GroupTable::cyclic(n).unwrap();
        let gens = [g, n - g];
        let model = zoo::cayley_model(&group, &gens);
        prop_assume!(model.is_ok());
        let model = model.unwrap();
        let homs: Vec<Homomorphism> = (2..n).filter(|d| n % d == 0).map(|d| Homomorphism::reduction_mod(n, d).unwrap()).collect();
        prop_assume!(!homs.is_empty());
        let maps: Vec<FactorMap> = homs.iter().map(|h| zoo::homomorphism_map(&model, &group, h).unwrap()).collect();
        let system = bl::edge_active_sets(&model, &maps).unwrap();
        let mut from_edges = system.constraint_sets();
        from_edges.sort();
        let mut from_gens: Vec<Vec<usize>> =
            zoo::cayley::generator_active_sets(&homs, &gens).into_iter().map(|(_, s)| s).filter(|s| !s.is_empty()).collect();
        from_gens.sort();
        from_gens.dedup();
        prop_assert_eq!(from_edges, from_gens);
    }

    #[test]
    fn hypergeometric_pmf_sums_to_one(colors in proptest::collection::vec(1usize..4, 1..4), frac in 0.0f64..=1.0) {
        let total: usize = colors.iter().sum();
        let draw = (total as f64 * frac).round() as usize;
        let mut sum = rat(0, 1);
        let mut counts = vec![0usize; colors.len()];
        loop {
            if counts.iter().sum::<usize>() == draw {
                sum += zoo::hypergeometric_pmf(&colors, &counts);
            }
            let mut i = 0;
            while i < counts.len() && counts[i] == colors[i] {
                counts[i] = 0;
                i += 1;
            }
            if i == counts.len() {
                break;
            }
            counts[i] += 1;
        }
        prop_assert_eq!(sum, rat(1, 1));
    }
}
