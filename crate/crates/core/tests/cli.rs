use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn cropgate<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_cropgate"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn farm() -> String {
    data("farm_soria.cg").display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_farm(dir: &Path, text: &str) -> String {
    let p = dir.join("farm.cg");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// Value in column `col` of the CSV row whose first field is `key`.
fn cell(csv: &str, key: &str, col: usize) -> String {
    csv.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0] == key)
        .unwrap_or_else(|| panic!("no row {key} in\n{csv}"))[col]
        .to_string()
}

#[test]
fn validate_exit_codes() {
    let ok = cropgate(["validate", "--farm", &farm()]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("7 crops"));

    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("farm_soria.cg")).unwrap();
    let cut = text.find("[crop.barley]").unwrap();
    let truncated = write_farm(dir.path(), &format!("{}[crop.barl", &text[..cut]));
    assert_eq!(cropgate(["validate", "--farm", &truncated]).status.code(), Some(2));

    let mismatch = write_farm(dir.path(), &text.replace("total_area = 302 ha", "total_area = 300 ha"));
    let out = cropgate(["validate", "--farm", &mismatch]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("302"));

    let missing = dir.path().join("absent.cg").display().to_string();
    assert_eq!(cropgate(["validate", "--farm", &missing]).status.code(), Some(2));
}

#[test]
fn assess_reports_net_gwp_and_energy() {
    let twg = cropgate(["assess", "--farm", &farm(), "--crop", "tall_wheatgrass"]);
    assert_eq!(twg.status.code(), Some(0));
    let text = stdout(&twg);
    assert_eq!(cell(&text, "net_total", 1), "-1.942");
    assert_eq!(cell(&text, "balance_with_cap", 1), "156.19");

    let rye = stdout(&cropgate(["assess", "--farm", &farm(), "--crop", "rye"]));
    assert_eq!(cell(&rye, "total", 3), "15.8");
    assert_eq!(cell(&rye, "soc_change", 1), "0.000");
}

#[test]
fn assess_unknown_crop_is_a_domain_error() {
    let out = cropgate(["assess", "--farm", &farm(), "--crop", "oats"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oats"));
}

#[test]
fn assess_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("twg");
    let o = cropgate(["assess", "--farm", &farm(), "--crop", "tall_wheatgrass", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for name in ["balance.csv", "gwp_phases.csv", "energy_phases.csv", "result.json", "manifest.json"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(result["manifest_digest"], manifest["digest"]);
    assert!(manifest["unix_time"].as_u64().is_some());
    assert!(result.get("unix_time").is_none());
    assert_eq!(result["manifest"]["inputs"].as_array().unwrap().len(), 2);
    let csv = fs::read_to_string(out.join("gwp_phases.csv")).unwrap();
    assert!(!csv.contains('\r'));

    let json_only = dir.path().join("json");
    let o = cropgate([
        "assess", "--farm", &farm(), "--crop", "rye", "--format", "json", "--out", json_only.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json_only.join("result.json").is_file());
    assert!(!json_only.join("balance.csv").exists());
}

#[test]
fn seed_one_level_lowers_rye_seed_burden() {
    let full = stdout(&cropgate(["assess", "--farm", &farm(), "--crop", "rye"]));
    let one = stdout(&cropgate(["assess", "--farm", &farm(), "--crop", "rye", "--seed-one-level"]));
    let seed = |t: &str| cell(t, "seed_pt", 1).parse::<f64>().unwrap();
    assert!(seed(&one) < seed(&full));
}

#[test]
fn compare_default_pair() {
    let out = cropgate(["compare", "--farm", &farm()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("metric,unit,tall_wheatgrass,rye,difference,better\n"));
    let diff: f64 = cell(&text, "balance_with_cap", 4).parse().unwrap();
    assert!((diff - 11.05).abs() <= 0.02, "{diff}");
    for metric in ["gwp_positive", "gwp_net", "energy_total"] {
        assert_eq!(cell(&text, metric, 5), "tall_wheatgrass");
    }
}

#[test]
fn compare_crop_with_itself_is_all_ties() {
    let text = stdout(&cropgate(["compare", "--farm", &farm(), "--crop", "rye", "--crop", "rye"]));
    for line in text.lines().skip(1) {
        let f: Vec<_> = line.split(',').collect();
        assert!(f[4].trim_start_matches('-').chars().all(|c| c == '0' || c == '.'), "{line}");
        assert_eq!(f[5], "tie");
    }
}

#[test]
fn compare_missing_factor_strict_and_cutoff() {
    let dir = tempfile::tempdir().unwrap();
    let factors = fs::read_to_string(data("factors_calibrated.cg")).unwrap();
    let start = factors.find("[flow.pesticide_unspecified]").unwrap();
    let end = start + factors[start..].find("\n[").unwrap() + 1;
    let trimmed = dir.path().join("factors.cg");
    fs::write(&trimmed, format!("{}{}", &factors[..start], &factors[end..])).unwrap();
    let f = trimmed.to_str().unwrap();

    let strict = cropgate(["compare", "--farm", &farm(), "--factors", f]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("pesticide_unspecified"));

    let cutoff = cropgate(["compare", "--farm", &farm(), "--factors", f, "--cutoff-missing"]);
    assert_eq!(cutoff.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&cutoff.stderr).contains("warning"));
}

#[test]
fn sweep_ranges() {
    let out = cropgate(["sweep", "--farm", &farm(), "--from", "0.1", "--to", "0.5", "--step", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    let last: f64 = rows[4].rsplit(',').next().unwrap().parse().unwrap();
    assert!((last - 2.29).abs() <= 0.01);

    let share = format!("{}", 40.0 / 302.0);
    let one = stdout(&cropgate(["sweep", "--farm", &farm(), "--shares", &share]));
    let v: f64 = one.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((v - 0.47).abs() <= 0.01);

    let empty = cropgate(["sweep", "--farm", &farm(), "--from", "0.5", "--to", "0.1", "--step", "0.1"]);
    assert_eq!(empty.status.code(), Some(2));
    let usage = cropgate(["sweep", "--farm", &farm(), "--from", "0.1"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = ["compare", "--farm", &farm(), "--format", "json"];
    assert_eq!(cropgate(args).stdout, cropgate(args).stdout);
    let args = ["sweep", "--farm", &farm(), "--shares", "0.2,0.3"];
    assert_eq!(cropgate(args).stdout, cropgate(args).stdout);
}
