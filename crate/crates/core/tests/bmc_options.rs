use std::time::Duration;

use wlbmc::bmc::{check, Backend, Options, Outcome};
use wlbmc::btor2::Model;
use wlbmc::riscu::corpus::{corpus_config, samples, Sample};
use wlbmc::riscu::{assemble, generate_model, simulate};

fn sample(name: &str) -> (Sample, Model) {
    let s = samples().into_iter().find(|s| s.name == name).unwrap();
    let m = generate_model(&s.program, &s.config).unwrap();
    (s, m)
}

fn opts(s: &Sample) -> Options {
    Options {
        kmax: s.kmax,
        array_bits: 8,
        bytes_to_read: Some(s.config.bytes_to_read as usize),
        ..Options::default()
    }
}

#[test]
fn branching_finds_the_same_events() {
    let (s, m) = sample("bad-exit-code");
    let merged = check(&m, &opts(&s)).unwrap();
    for backend in [Backend::Roabvdd, Backend::Cflobvdd { block_bits: 4 }] {
        let split = check(&m, &Options { branching: true, backend, ..opts(&s) }).unwrap();
        assert_eq!(split.event_map(), merged.event_map());
        assert!(split.paths >= 2, "{} paths", split.paths);
        assert!(!split.partial);
    }
    assert_eq!(merged.paths, 1);
}

#[test]
fn kmin_skips_earlier_steps() {
    let (s, m) = sample("division-by-zero");
    let at = check(&m, &Options { kmin: 15, ..opts(&s) }).unwrap();
    assert_eq!(at.events.len(), 1);
    assert_eq!(at.events[0].k, 15);
    let past = check(&m, &Options { kmin: 16, ..opts(&s) }).unwrap();
    assert!(past.events.iter().all(|e| e.k >= 16), "{:?}", past.events);
}

#[test]
fn unconstraining_bad_keeps_reported_inputs_live() {
    let (s, m) = sample("division-by-zero");
    let plain = check(&m, &opts(&s)).unwrap();
    let loose = check(&m, &Options { unconstraining_bad: true, ..opts(&s) }).unwrap();
    let first = &plain.events[0];
    assert!(loose.events.iter().any(|e| e.k == first.k && e.inputs == first.inputs));
    assert!(loose.events.len() >= plain.events.len());
}

#[test]
fn trace_flags_print_lines() {
    let (s, m) = sample("division-by-zero");
    let r = check(&m, &Options { print_pc: true, print_transition: true, ..opts(&s) }).unwrap();
    assert!(r.trace.len() as u32 > r.steps, "{} lines for {} steps", r.trace.len(), r.steps);
    let quiet = check(&m, &opts(&s)).unwrap();
    assert!(quiet.trace.is_empty());
}

#[test]
fn termination_is_detected_after_exit() {
    let program = assemble("  addi a0, zero, 0\n  addi a7, zero, 93\n  ecall\n").unwrap();
    let m = generate_model(&program, &corpus_config(1)).unwrap();
    let o = Options { kmax: 50, check_termination: true, bytes_to_read: Some(1), ..Options::default() };
    let r = check(&m, &o).unwrap();
    assert!(r.events.is_empty());
    assert!(matches!(r.outcome, Outcome::Terminated(k) if k < 10), "{:?}", r.outcome);
    let without = check(&m, &Options { check_termination: false, ..o }).unwrap();
    assert_eq!(without.outcome, Outcome::Completed);
    assert_eq!(without.steps, 50);
}

#[test]
fn zero_timeout_aborts() {
    let (s, m) = sample("division-by-zero");
    let r = check(&m, &Options { timeout: Some(Duration::ZERO), propagate: 0, ..opts(&s) }).unwrap();
    assert_eq!(r.outcome, Outcome::Timeout);
    assert!(r.is_aborted());
}

#[test]
fn instruction_counts_match_the_simulator() {
    for name in ["multi-input-2", "division-by-zero"] {
        let (s, m) = sample(name);
        let r = check(&m, &opts(&s)).unwrap();
        let e = &r.events[0];
        let input = &e.inputs.assignments()[0];
        let t = simulate(&s.program, &s.config, input, s.kmax).unwrap();
        assert_eq!(t.violation.as_ref().map(|v| v.0), Some(e.k), "{name}");
        assert_eq!(e.instructions, Some(t.instructions), "{name}");
    }
}
