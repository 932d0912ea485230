use super::*;

const MINIMAL: &str = "spec = point(2.0)\n";

#[test]
fn minimal_document_gets_every_default() {
    let cfg = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.spec, crate::environment::DistSpec::Point(2.0));
    assert_eq!(cfg.mode, ModeKind::Quenched);
    assert_eq!((cfg.h, cfg.w, cfg.r, cfg.m), (4, 16, 1, 30));
    assert_eq!(cfg.t_grid, vec![5.0, 10.0, 20.0, 40.0]);
    assert_eq!(cfg.initial, vec![Site::ORIGIN]);
    assert_eq!(cfg.margin, None);
    assert_eq!(cfg.echo.len(), config::KEYS.len());
    assert_eq!(cfg.echo["spec"], "point(2.0)");
}

#[test]
fn every_error_is_reported() {
    let doc = "spec = point(2.0)\nd = 2\ntrials = -5\nbogus = 1\nh = 4\nh = 5\nwindow = 0,0,4,4\nnot a pair\n";
    let issues = parse_config(doc).unwrap_err();
    let keys: Vec<&str> = issues.iter().map(|i| i.key.as_str()).collect();
    assert!(keys.contains(&"d"), "{issues:?}");
    assert!(issues.iter().any(|i| i.key == "d" && i.msg.contains("only d=1 implemented")));
    assert!(keys.contains(&"trials"));
    assert!(keys.contains(&"bogus"));
    assert!(keys.contains(&"h"));
    assert!(keys.contains(&"window"));
    assert!(keys.contains(&"not a pair"));
    assert_eq!(issues.len(), 6);
}

#[test]
fn spec_is_required_and_checked() {
    assert!(parse_config("").unwrap_err().iter().any(|i| i.key == "spec"));
    assert!(parse_config("spec = point(-1.0)").unwrap_err().iter().any(|i| i.key == "spec"));
    assert!(parse_config("spec = zigzag(1)").is_err());
}

#[test]
fn comments_and_lists_parse() {
    let doc = "# header\nspec = uniform(1.5, 2.5)   # rates\ninitial = 0+0i; 2,1 ; -1+3i\nmargin = 6\norigin = 10+20i\nbox_T = 7.5\n";
    let cfg = parse_config(doc).unwrap();
    assert_eq!(cfg.initial, vec![Site::at(0, 0), Site::at(2, 1), Site::at(-1, 3)]);
    assert_eq!(cfg.margin, Some(6));
    assert_eq!(cfg.origin, Some(Site::at(10, 20)));
    assert_eq!(cfg.box_horizon, Some(7.5));
    assert_eq!(cfg.echo["initial"], "0+0i;2+1i;-1+3i");
}

#[test]
fn schema_round_trips_once_spec_is_set() {
    let doc = schema().replace("spec = \n", "spec = point(1.0)\n");
    let cfg = parse_config(&doc).unwrap();
    assert_eq!(cfg, parse_config("spec = point(1.0)").unwrap());
}

#[test]
fn cc_needs_a_fixed_environment() {
    let cfg = parse_config("spec = point(2.0)\nmode = annealed").unwrap();
    assert!(matches!(check_for(Command::Cc, &cfg), Err(Error::Config(_))));
    assert!(check_for(Command::Blocks, &cfg).is_ok());
}

#[test]
fn survival_without_infection_follows_the_closed_form() {
    let doc = "spec = point(0.0)\ninitial = 0+0i; 3+1i; -2+4i\nT = 2\nt_grid = 0.5,1\ntrials = 4000\n";
    let cfg = parse_config(doc).unwrap();
    let rep = run_command(Command::Survival, &cfg, 1).unwrap();
    assert_eq!(rep.status, 0);
    let csv = &rep.files[0].1;
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let truth = 1.0 - (1.0 - (-f[0]).exp()).powi(3);
        let se = (truth * (1.0 - truth) / f[4]).sqrt();
        assert!((f[1] - truth).abs() <= 3.0 * se, "{line} vs {truth}");
        rows += 1;
    }
    assert_eq!(rows, 3);
}

#[test]
fn reports_do_not_depend_on_threads() {
    let doc = "spec = uniform(0.5, 2.5)\nh = 2\nw = 4\nr = 1\nN_grid = 0,2\ntrials = 60\n";
    let cfg = parse_config(doc).unwrap();
    let one = run_command(Command::Blocks, &cfg, 1).unwrap();
    let four = run_command(Command::Blocks, &cfg, 4).unwrap();
    assert_eq!(one.files, four.files);
    let json: Value = serde_json::from_str(&one.files[1].1).unwrap();
    for key in ["config", "results", "diagnostics"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert!(one.files.iter().any(|f| f.0 == "blocks_phi_R.dat"));
}

#[test]
fn dead_environment_fails_the_renorm_experiment() {
    let cfg = parse_config("spec = point(0.0)\nh = 4\nr = 1\nM = 30\nn = 1\ntrials = 3\n").unwrap();
    let rep = run_command(Command::Renorm, &cfg, 1).unwrap();
    assert_eq!(rep.status, 1);
}

#[test]
fn files_land_in_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.cfg");
    std::fs::write(&cfg_path, "spec = zero_or(3.0, 0.5)\nregion = 0,0,3,2\n").unwrap();
    let out = dir.path().join("out");
    let code = main_with(["cpre", "env", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    for f in ["env.csv", "env.json", "env.txt", "env_rates.dat", "env.timing.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let exported = std::fs::read_to_string(out.join("env.txt")).unwrap();
    assert!(crate::environment::Environment::import(&exported).is_ok());
}

#[test]
fn exit_codes() {
    assert_eq!(main_with(["cpre", "frobnicate"]), 2);
    assert_eq!(main_with(["cpre", "env", "/nonexistent/cfg"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(&p, "spec = point(1.0)\nd = 2\n").unwrap();
    assert_eq!(main_with(["cpre", "survival", p.to_str().unwrap()]), 2);
}
