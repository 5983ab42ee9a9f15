use evolvs_core::bdf::{starting_values, Stepper};
use evolvs_core::linsolve::solve_spd;
use evolvs_core::{
    solve, AmbientField, Assembler, BdfScheme, Error, FlowMap, MovingMesh, NodalField, NonlinearSource, Nonlinearity,
    Problem, SolverConfig, SpatialDiscretization, SurfaceMesh, TimeGrid,
};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn mass_matrix_is_positive_definite() {
    let mesh = SurfaceMesh::icosphere(2).unwrap();
    let flow = FlowMap::standard_ellipsoid();
    let mass = Assembler::new(&mesh).assemble_mass(&mesh.at_time(&flow, 0.3)).unwrap();
    let mut x: Vec<f64> = (0..mesh.node_count()).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
    let mut lambda = 0.0;
    for _ in 0..50 {
        let n = norm(&x);
        x.iter_mut().for_each(|v| *v /= n);
        let y = solve_spd(&mass, &x, &SolverConfig::default()).unwrap().into_converged().unwrap();
        lambda = 1.0 / norm(&y);
        x = y;
    }
    assert!(lambda > 0.0);
    let x: Vec<f64> = x.iter().map(|v| v / norm(&x)).collect();
    assert!(mass.bilinear(&x, &x) > 0.0);
    assert!((mass.bilinear(&x, &x) - lambda).abs() < 1e-3 * lambda);
}

#[test]
fn constants_are_preserved_on_a_stationary_surface() {
    let mesh = SurfaceMesh::icosphere(2).unwrap();
    let disc = MovingMesh::new(&mesh, FlowMap::stationary_sphere());
    let n = mesh.node_count();
    for k in 1..=6 {
        let scheme = BdfScheme::new(k).unwrap();
        let grid = TimeGrid::new(0.05, 1.0).unwrap();
        let start: Vec<_> = (0..k).map(|i| NodalField::new(vec![2.5; n], i)).collect();
        let mut stepper = Stepper::new(&disc, scheme, grid, SolverConfig::default(), start).unwrap();
        while !stepper.is_finished() {
            let u = stepper.step_linear(&vec![0.0; n]).unwrap();
            assert!(u.values.iter().all(|v| (v - 2.5).abs() < 1e-10), "k = {k}");
        }
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    let mesh = SurfaceMesh::icosphere(1).unwrap();
    let disc = MovingMesh::new(&mesh, FlowMap::standard_ellipsoid());
    let problem = Problem { source: NonlinearSource::ZERO, exact: Some(AmbientField::Zero), initial: None };
    for k in [1, 3, 6] {
        let grid = TimeGrid::new(0.1, 1.0).unwrap();
        let traj = solve(&problem, &BdfScheme::new(k).unwrap(), &grid, &disc, &SolverConfig::default()).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.iter().all(|u| u.values.iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn zero_source_step_matches_linear_step() {
    let mesh = SurfaceMesh::icosphere(2).unwrap();
    let disc = MovingMesh::new(&mesh, FlowMap::standard_ellipsoid());
    let scheme = BdfScheme::new(2).unwrap();
    let grid = TimeGrid::new(0.1, 1.0).unwrap();
    let problem = Problem::manufactured(NonlinearSource::ZERO, AmbientField::standard());
    let start = starting_values(&problem, &scheme, &grid, &disc).unwrap();
    let mut a = Stepper::new(&disc, scheme.clone(), grid, SolverConfig::default(), start.clone()).unwrap();
    let mut b = Stepper::new(&disc, scheme, grid, SolverConfig::default(), start).unwrap();
    for _ in 0..3 {
        let ua = a.step_nonlinear(&NonlinearSource::ZERO).unwrap();
        let ub = b.step_linear(&vec![0.0; mesh.node_count()]).unwrap();
        assert_eq!(ua, ub);
    }
}

#[test]
fn starting_values_interpolate_the_exact_solution() {
    let mesh = SurfaceMesh::icosphere(1).unwrap();
    let flow = FlowMap::standard_ellipsoid();
    let disc = MovingMesh::new(&mesh, flow);
    let exact = AmbientField::standard();
    let grid = TimeGrid::new(0.1, 1.0).unwrap();
    let problem = Problem::manufactured(NonlinearSource::ZERO, exact);
    let start = starting_values(&problem, &BdfScheme::new(2).unwrap(), &grid, &disc).unwrap();
    assert_eq!(start.len(), 2);
    for (i, u) in start.iter().enumerate() {
        let t = grid.time(i);
        for (v, y) in u.values.iter().zip(&mesh.nodes0) {
            assert_eq!(*v, exact.value(&flow.position(y, t), t));
        }
    }
    let initial_only = Problem { source: NonlinearSource::ZERO, exact: None, initial: Some(start[0].values.clone()) };
    assert!(matches!(
        starting_values(&initial_only, &BdfScheme::new(2).unwrap(), &grid, &disc),
        Err(Error::MissingExactSolution(2))
    ));
    assert_eq!(starting_values(&initial_only, &BdfScheme::new(1).unwrap(), &grid, &disc).unwrap().len(), 1);
}

#[test]
fn step_systems_are_positive_definite() {
    let mesh = SurfaceMesh::icosphere(2).unwrap();
    let disc = MovingMesh::new(&mesh, FlowMap::standard_ellipsoid());
    let scheme = BdfScheme::new(3).unwrap();
    for t in [0.0, 0.4, 0.9] {
        let (m, a) = disc.operators(t).unwrap();
        let sys = m.combine(scheme.delta[0] / 0.01, &a, 1.0);
        assert!(sys.is_symmetric(1e-14 * sys.max_abs()));
        for s in 0..20 {
            let x: Vec<f64> = (0..mesh.node_count()).map(|i| (((i + 3 * s) * 7919) % 101) as f64 - 50.0).collect();
            assert!(sys.bilinear(&x, &x) > 0.0);
        }
    }
}

#[test]
fn harmonic_map_run_stays_close_to_exact_solution() {
    let mesh = SurfaceMesh::icosphere(3).unwrap();
    let flow = FlowMap::standard_ellipsoid();
    let exact = AmbientField::standard();
    let problem = Problem::manufactured(NonlinearSource::manufactured(Nonlinearity::HarmonicMap, exact), exact);
    let grid = TimeGrid::new(0.05, 1.0).unwrap();
    let traj =
        solve(&problem, &BdfScheme::new(2).unwrap(), &grid, &MovingMesh::new(&mesh, flow), &SolverConfig::default())
            .unwrap();
    let last = traj.last().unwrap();
    let err = last
        .values
        .iter()
        .zip(&mesh.nodes0)
        .map(|(v, y)| (v - exact.value(&flow.position(y, 1.0), 1.0)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-2, "{err}");
}
