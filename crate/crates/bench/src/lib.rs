//! Fixtures shared by the benchmarks.

use nisynth_core::{
    parse_expr, ClosedLoopSystem, Interconnection, NormalFormPlant, OsniUncertainty, SquareMatrix, SynthesisSpec,
    Target,
};

pub const X0: [f64; 4] = [3.0, 1.0, -1.0, 2.0];

pub fn example_plant() -> NormalFormPlant {
    let a11 = SquareMatrix::from_rows(&[vec![-1.0]]).unwrap();
    NormalFormPlant::parse(a11, &["xi1^2*xi2"], 1, 1).unwrap()
}

pub fn example_spec(plant: &NormalFormPlant) -> SynthesisSpec {
    let p = SquareMatrix::from_rows(&[vec![1.0]]).unwrap();
    let v2 = parse_expr("xi1^(4/3) + xi2^2", &plant.output_names()).unwrap();
    SynthesisSpec::new(p, v2, 1.0, Target::Osni).unwrap()
}

pub fn example_closed_loop() -> ClosedLoopSystem {
    let plant = example_plant();
    let spec = example_spec(&plant);
    ClosedLoopSystem::new(plant, spec).unwrap()
}

pub fn example_interconnection() -> Interconnection {
    let unc = OsniUncertainty::parse(&["-xs1^3 + us1", "-xs2 + us2"], &["xs1", "xs2"], "1/4*xs1^4 + 1/2*xs2^2", 1.0)
        .unwrap();
    Interconnection::new(example_closed_loop(), unc).unwrap()
}
