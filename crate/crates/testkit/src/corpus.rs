//! Hand-labeled parser corpus.

/// One labeled completion.
#[derive(Clone, Debug)]
pub struct GoldenCase {
    pub name: String,
    pub text: String,
    pub stage_valid: [bool; 3],
    pub graph: bool,
}

pub const FRAME: (&str, u32, u32) = ("golden", 640, 480);

const RAW: &str = include_str!("../data/golden.txt");

pub fn golden_corpus() -> Vec<GoldenCase> {
    let mut cases = Vec::new();
    let mut current: Option<(GoldenCase, Vec<&str>)> = None;
    let finish = |c: Option<(GoldenCase, Vec<&str>)>, out: &mut Vec<GoldenCase>| {
        if let Some((mut case, lines)) = c {
            case.text = lines.join("\n").trim_matches('\n').to_owned();
            out.push(case);
        }
    };
    for line in RAW.lines() {
        if let Some(header) = line.strip_prefix("### ") {
            finish(current.take(), &mut cases);
            let parts: Vec<&str> = header.split_whitespace().collect();
            assert_eq!(parts.len(), 3, "bad header `{line}`");
            let flags: Vec<bool> = parts[1]
                .chars()
                .map(|c| match c {
                    'T' => true,
                    'F' => false,
                    _ => panic!("bad flag in `{line}`"),
                })
                .collect();
            let graph = match parts[2] {
                "graph" => true,
                "nograph" => false,
                other => panic!("bad graph label `{other}`"),
            };
            let case = GoldenCase {
                name: parts[0].to_owned(),
                text: String::new(),
                stage_valid: [flags[0], flags[1], flags[2]],
                graph,
            };
            current = Some((case, Vec::new()));
        } else if let Some((_, lines)) = current.as_mut() {
            lines.push(line);
        }
    }
    finish(current, &mut cases);
    cases
}
