//! Follows one branch of the unstable manifold of the origin with section
//! events on x = q_x and writes the trajectory and event log as CSV.

use flipscope::flow::{self, Crossing, EventSpec, IntegratorConfig, Record};
use flipscope::model::{self, Params, State};
use flipscope::winding;

fn main() -> flipscope::Result<()> {
    let p = Params::reference(0.5, -0.003);
    let q = model::find_q(&p)?;
    let seed = winding::unstable_seed(&p, 1e-7)?;
    let events = [
        EventSpec::plane(State::x(), q.location.x, Crossing::Decreasing).with_max_count(6),
        EventSpec::quadrant_entry(),
    ];
    let cfg = IntegratorConfig::default().with_t_max(500.0).with_record(Record::Steps);
    let traj = flow::integrate(&p, &seed, &cfg, &events)?;
    println!(
        "{} steps, arclength {:.6}, termination {:?}",
        traj.states.len(),
        traj.arclength,
        traj.termination
    );
    for e in traj.events_of(0) {
        println!("  t = {:9.4}  (y, z) = ({:+.6}, {:+.6})", e.t, e.state.y, e.state.z);
    }

    let dir = std::env::temp_dir();
    let mut out = std::fs::File::create(dir.join("unstable_branch.csv"))?;
    flow::write_trajectory_csv(&p, &traj, &mut out)?;
    let mut ev = std::fs::File::create(dir.join("unstable_branch_events.csv"))?;
    flow::write_events_csv(&traj, &mut ev)?;
    println!("wrote {}", dir.join("unstable_branch.csv").display());
    Ok(())
}
