use emu_core::app::{emit_application, parse_application, validate_dag};
use emu_core::extract::planted::{Planted, PlantedParams};
use emu_core::extract::{extract, DetectParams};
use emu_core::rng::SeededRng;

#[test]
fn fifty_planted_programs_are_recovered_exactly() {
    let mut rng = SeededRng::new(2024);
    for i in 0..50 {
        let Planted { trace, kernels } = Planted::generate(&mut rng, &PlantedParams::default());
        let ex = extract(&trace, &DetectParams::default(), &format!("planted{i}")).unwrap();
        let found: Vec<Vec<u32>> = ex.kernels.iter().map(|k| k.members.clone()).collect();
        assert_eq!(found, kernels, "program {i}");
        let report = validate_dag(&ex.spec);
        assert!(report.is_clean(), "program {i}: {report}");
        assert_eq!(
            parse_application(&emit_application(&ex.spec)).unwrap(),
            ex.spec
        );
        assert_eq!(
            ex.nodes.iter().filter(|n| n.is_kernel()).count(),
            kernels.len()
        );
    }
}
