use crate::engine::CommandBinding;

/// Preset activities and their default keys.
const PRESETS: [(&str, &str); 4] = [
    ("youtube", "Space"),
    ("helpkidzlearn", "Space"),
    ("brain-joust", "Up"),
    ("steam", "Space"),
];

pub fn preset_activities() -> Vec<CommandBinding> {
    PRESETS
        .iter()
        .map(|(activity, key)| CommandBinding::new(*activity, *key).expect("preset keys are non-empty"))
        .collect()
}

pub fn preset(activity: &str) -> Option<CommandBinding> {
    preset_activities().into_iter().find(|b| b.activity() == activity)
}
