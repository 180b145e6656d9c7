//! Solves each asset model of the CT scenario at one availability fee and
//! prints the flexible capacity with a short summary of the schedule.

use flexmarket::flex::Detail;
use flexmarket::scenario::Scenario;

fn main() -> flexmarket::Result<()> {
    let scenario = Scenario::bundled("ct")?;
    let window = scenario.requirement.window;
    let fee = 20.0;
    let models = scenario.models()?;
    for model in models.all() {
        let d = model.dispatch(fee, &window)?;
        let note = match &d.detail {
            Detail::Hp { max_deviation, .. } => format!("max comfort deviation {max_deviation:.2} °C"),
            Detail::Ev { unmet_energy, .. } => format!("unmet energy {:.3} MWh", unmet_energy.iter().sum::<f64>()),
            Detail::Ees { dod, segment, .. } => format!("depth of discharge {dod:.2} (segment {segment})"),
            Detail::Ic { recovery } => format!("recovered {:.3} MWh", recovery.iter().sum::<f64>() * model.grid().step_hours()),
        };
        println!("{:>4}: {:.3} MW at {fee} £/MW/h, objective {:.2} £, {note}", model.class(), d.flexibility, d.objective);
    }
    Ok(())
}
