#include "primix/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "primix/csv.hpp"

namespace primix {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

CEConfig ExperimentConfig::ce_config() const {
    CEConfig ce;
    ce.rho = rho;
    ce.top_m = top_m;
    ce.samples_per_primitive = samples_per_primitive;
    ce.noise_sigma_theta = noise_sigma_theta;
    ce.noise_sigma_omega = noise_sigma_omega;
    ce.noise_sigma_tau = noise_sigma_tau;
    ce.cost_window =
        cost_window == "full_window" ? CostWindow::kFullWindow : CostWindow::kFirstStep;
    ce.seed = seed;
    ce.threads = threads;
    return ce;
}

const TaskGeometry& ExperimentConfig::task(const std::string& name) const {
    for (const auto& t : tasks)
        if (t.name == name) return t;
    throw std::invalid_argument("unknown task: " + name);
}

namespace {

std::string vec_text(const Eigen::Vector2d& v) {
    return format_double(v.x()) + " " + format_double(v.y());
}

std::string vec_text(const Eigen::Vector3d& v) {
    return format_double(v.x()) + " " + format_double(v.y()) + " " + format_double(v.z());
}

std::string ints_text(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? " " : "") + std::to_string(v[i]);
    return out;
}

std::vector<double> parse_numbers(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (ss >> tok) out.push_back(parse_double(tok));
    return out;
}

Eigen::Vector2d parse_vec2(const std::string& text) {
    const auto v = parse_numbers(text);
    if (v.size() != 2) throw std::runtime_error("config: expected 2 numbers, got '" + text + "'");
    return {v[0], v[1]};
}

Eigen::Vector3d parse_vec3(const std::string& text) {
    const auto v = parse_numbers(text);
    if (v.size() != 3) throw std::runtime_error("config: expected 3 numbers, got '" + text + "'");
    return {v[0], v[1], v[2]};
}

std::vector<int> parse_ints(const std::string& text) {
    std::vector<int> out;
    for (double d : parse_numbers(text)) out.push_back(static_cast<int>(d));
    return out;
}

bool parse_bool(const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw std::runtime_error("config: expected bool, got '" + text + "'");
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string ExperimentConfig::serialize() const {
    std::ostringstream os;
    os << "# primix experiment configuration\n";
    os << "\n[core]\n";
    os << "dof = " << dof << "\n";

    os << "\n[plant]\n";
    os << "link_lengths = " << format_double(plant.link_lengths[0]) << " "
       << format_double(plant.link_lengths[1]) << "\n";
    os << "link_masses = " << format_double(plant.link_masses[0]) << " "
       << format_double(plant.link_masses[1]) << "\n";
    os << "joint_damping = " << vec_text(plant.joint_damping) << "\n";
    os << "gripper_stiffness = " << format_double(plant.gripper_stiffness) << "\n";
    os << "gripper_inertia = " << format_double(plant.gripper_inertia) << "\n";
    os << "dt_sim = " << format_double(plant.dt_sim) << "\n";
    os << "gravity = " << (plant.gravity ? "true" : "false") << "\n";
    os << "dt_ctrl = " << format_double(dt_ctrl) << "\n";

    os << "\n[gains]\n";
    os << "kp = " << vec_text(gains.kp) << "\n";
    os << "kd = " << vec_text(gains.kd) << "\n";
    os << "kf = " << vec_text(gains.kf) << "\n";
    os << "operator_kp = " << vec_text(operator_kp) << "\n";
    os << "operator_kd = " << vec_text(operator_kd) << "\n";

    os << "\n[scene]\n";
    os << "grasp_radius = " << format_double(grasp_radius) << "\n";
    os << "place_radius = " << format_double(place_radius) << "\n";
    os << "gripper_close_angle = " << format_double(gripper_close_angle) << "\n";
    os << "object_mass = " << format_double(object_mass) << "\n";
    os << "attach_stiffness = " << format_double(attach_stiffness) << "\n";
    os << "attach_damping = " << format_double(attach_damping) << "\n";

    os << "\n[script]\n";
    os << "home = " << vec_text(home) << "\n";
    os << "reach_time = " << format_double(reach_time) << "\n";
    os << "grip_time = " << format_double(grip_time) << "\n";
    os << "carry_time = " << format_double(carry_time) << "\n";
    os << "release_time = " << format_double(release_time) << "\n";
    os << "retreat_time = " << format_double(retreat_time) << "\n";
    os << "settle_time = " << format_double(settle_time) << "\n";
    os << "grip_open = " << format_double(grip_open) << "\n";
    os << "grip_closed = " << format_double(grip_closed) << "\n";

    os << "\n[segmentation]\n";
    os << "n_segments = " << segmentation.n_segments << "\n";
    os << "jitter_lo = " << format_double(segmentation.jitter_lo) << "\n";
    os << "jitter_hi = " << format_double(segmentation.jitter_hi) << "\n";

    os << "\n[nn]\n";
    os << "# Table-I-scale fidelity sizes: lower_hidden = 200 x8, upper 10x80, ltof 10x80\n";
    os << "lower_hidden = " << ints_text(lower_hidden) << "\n";
    os << "upper_hidden = " << upper_hidden << "\n";
    os << "upper_layers = " << upper_layers << "\n";
    os << "ltof_hidden = " << ints_text(ltof_hidden) << "\n";

    os << "\n[train]\n";
    os << "learning_rate = " << format_double(learning_rate) << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "lower_epochs = " << lower_epochs << "\n";
    os << "upper_epochs = " << upper_epochs << "\n";
    os << "learning_epochs = " << learning_epochs << "\n";
    os << "ltof_epochs = " << ltof_epochs << "\n";
    os << "augment_sigma = " << format_double(augment_sigma) << "\n";
    os << "augment_copies = " << augment_copies << "\n";
    os << "seed = " << seed << "\n";

    os << "\n[models]\n";
    os << "horizon = " << horizon << "\n";
    os << "alpha = " << format_double(cost_weights.alpha) << "\n";
    os << "beta = " << format_double(cost_weights.beta) << "\n";
    os << "gamma = " << format_double(cost_weights.gamma) << "\n";
    os << "rho = " << format_double(rho) << "\n";
    os << "top_m = " << top_m << "\n";
    os << "samples_per_primitive = " << samples_per_primitive << "\n";
    os << "noise_sigma_theta = " << format_double(noise_sigma_theta) << "\n";
    os << "noise_sigma_omega = " << format_double(noise_sigma_omega) << "\n";
    os << "noise_sigma_tau = " << format_double(noise_sigma_tau) << "\n";
    os << "cost_window = " << cost_window << "\n";
    os << "learning_max_primitives = " << learning_max_primitives << "\n";
    os << "threads = " << threads << "\n";

    os << "\n[run]\n";
    os << "trials = " << trials << "\n";
    os << "start_perturbation = " << format_double(start_perturbation) << "\n";
    os << "validation_task = " << validation_task << "\n";

    for (const auto& t : tasks) {
        os << "\n[task." << t.name << "]\n";
        os << "role = " << t.role << "\n";
        for (std::size_t i = 0; i < t.object_starts.size(); ++i) {
            const std::string suffix = i == 0 ? "" : std::to_string(i + 1);
            os << "object" << suffix << " = " << vec_text(t.object_starts[i]) << "\n";
            os << "goal" << suffix << " = " << vec_text(t.object_goals[i]) << "\n";
        }
    }
    return os.str();
}

std::string ExperimentConfig::config_hash() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize())));
    return std::string(buf);
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.tasks = {
        {"left_to_right", "primitive", {{-0.28, 0.25}}, {{0.28, 0.25}}},
        {"right_to_left", "primitive", {{0.28, 0.25}}, {{-0.28, 0.25}}},
        {"front_to_back", "primitive", {{0.0, 0.42}}, {{0.0, 0.22}}},
        {"low_right_to_high_left", "primitive", {{0.30, 0.15}}, {{-0.20, 0.38}}},
        {"high_right_to_low_left", "primitive", {{0.20, 0.38}}, {{-0.30, 0.15}}},
        {"two_object", "composite",
         {{0.30, 0.20}, {-0.28, 0.22}},
         {{-0.05, 0.33}, {0.10, 0.40}}},
    };
    return cfg;
}

namespace {

struct KeyRef {
    ExperimentConfig& cfg;

    void apply(const std::string& section, const std::string& key, const std::string& value) {
        if (section.rfind("task.", 0) == 0) {
            apply_task(section.substr(5), key, value);
            return;
        }
        const std::string id = section + "." + key;
        if (id == "core.dof") cfg.dof = std::stoi(value);
        else if (id == "plant.link_lengths") cfg.plant.link_lengths = parse_vec2(value);
        else if (id == "plant.link_masses") cfg.plant.link_masses = parse_vec2(value);
        else if (id == "plant.joint_damping") cfg.plant.joint_damping = parse_vec3(value);
        else if (id == "plant.gripper_stiffness") cfg.plant.gripper_stiffness = parse_double(value);
        else if (id == "plant.gripper_inertia") cfg.plant.gripper_inertia = parse_double(value);
        else if (id == "plant.dt_sim") cfg.plant.dt_sim = parse_double(value);
        else if (id == "plant.gravity") cfg.plant.gravity = parse_bool(value);
        else if (id == "plant.dt_ctrl") cfg.dt_ctrl = parse_double(value);
        else if (id == "gains.kp") cfg.gains.kp = parse_vec3(value);
        else if (id == "gains.kd") cfg.gains.kd = parse_vec3(value);
        else if (id == "gains.kf") cfg.gains.kf = parse_vec3(value);
        else if (id == "gains.operator_kp") cfg.operator_kp = parse_vec3(value);
        else if (id == "gains.operator_kd") cfg.operator_kd = parse_vec3(value);
        else if (id == "scene.grasp_radius") cfg.grasp_radius = parse_double(value);
        else if (id == "scene.place_radius") cfg.place_radius = parse_double(value);
        else if (id == "scene.gripper_close_angle") cfg.gripper_close_angle = parse_double(value);
        else if (id == "scene.object_mass") cfg.object_mass = parse_double(value);
        else if (id == "scene.attach_stiffness") cfg.attach_stiffness = parse_double(value);
        else if (id == "scene.attach_damping") cfg.attach_damping = parse_double(value);
        else if (id == "script.home") cfg.home = parse_vec2(value);
        else if (id == "script.reach_time") cfg.reach_time = parse_double(value);
        else if (id == "script.grip_time") cfg.grip_time = parse_double(value);
        else if (id == "script.carry_time") cfg.carry_time = parse_double(value);
        else if (id == "script.release_time") cfg.release_time = parse_double(value);
        else if (id == "script.retreat_time") cfg.retreat_time = parse_double(value);
        else if (id == "script.settle_time") cfg.settle_time = parse_double(value);
        else if (id == "script.grip_open") cfg.grip_open = parse_double(value);
        else if (id == "script.grip_closed") cfg.grip_closed = parse_double(value);
        else if (id == "segmentation.n_segments") cfg.segmentation.n_segments = std::stoi(value);
        else if (id == "segmentation.jitter_lo") cfg.segmentation.jitter_lo = parse_double(value);
        else if (id == "segmentation.jitter_hi") cfg.segmentation.jitter_hi = parse_double(value);
        else if (id == "nn.lower_hidden") cfg.lower_hidden = parse_ints(value);
        else if (id == "nn.upper_hidden") cfg.upper_hidden = std::stoi(value);
        else if (id == "nn.upper_layers") cfg.upper_layers = std::stoi(value);
        else if (id == "nn.ltof_hidden") cfg.ltof_hidden = parse_ints(value);
        else if (id == "train.learning_rate") cfg.learning_rate = parse_double(value);
        else if (id == "train.batch_size") cfg.batch_size = std::stoi(value);
        else if (id == "train.lower_epochs") cfg.lower_epochs = std::stoi(value);
        else if (id == "train.upper_epochs") cfg.upper_epochs = std::stoi(value);
        else if (id == "train.learning_epochs") cfg.learning_epochs = std::stoi(value);
        else if (id == "train.ltof_epochs") cfg.ltof_epochs = std::stoi(value);
        else if (id == "train.augment_sigma") cfg.augment_sigma = parse_double(value);
        else if (id == "train.augment_copies") cfg.augment_copies = std::stoi(value);
        else if (id == "train.seed") cfg.seed = std::stoull(value);
        else if (id == "models.horizon") cfg.horizon = std::stoi(value);
        else if (id == "models.alpha") cfg.cost_weights.alpha = parse_double(value);
        else if (id == "models.beta") cfg.cost_weights.beta = parse_double(value);
        else if (id == "models.gamma") cfg.cost_weights.gamma = parse_double(value);
        else if (id == "models.rho") cfg.rho = parse_double(value);
        else if (id == "models.top_m") cfg.top_m = std::stoi(value);
        else if (id == "models.samples_per_primitive") cfg.samples_per_primitive = std::stoi(value);
        else if (id == "models.noise_sigma_theta") cfg.noise_sigma_theta = parse_double(value);
        else if (id == "models.noise_sigma_omega") cfg.noise_sigma_omega = parse_double(value);
        else if (id == "models.noise_sigma_tau") cfg.noise_sigma_tau = parse_double(value);
        else if (id == "models.cost_window") cfg.cost_window = value;
        else if (id == "models.learning_max_primitives") cfg.learning_max_primitives = std::stoi(value);
        else if (id == "models.threads") cfg.threads = std::stoi(value);
        else if (id == "run.trials") cfg.trials = std::stoi(value);
        else if (id == "run.start_perturbation") cfg.start_perturbation = parse_double(value);
        else if (id == "run.validation_task") cfg.validation_task = value;
        else throw std::runtime_error("config: unknown key '" + id + "'");
    }

    void apply_task(const std::string& name, const std::string& key, const std::string& value) {
        TaskGeometry* task = nullptr;
        for (auto& t : cfg.tasks)
            if (t.name == name) task = &t;
        if (!task) {
            cfg.tasks.push_back(TaskGeometry{name, "primitive", {}, {}});
            task = &cfg.tasks.back();
        }
        auto slot = [&](const std::string& base) -> std::size_t {
            // "object" -> 0, "object2" -> 1, ...
            const std::string digits = key.substr(base.size());
            const std::size_t idx = digits.empty() ? 0 : std::stoul(digits) - 1;
            if (task->object_starts.size() <= idx) {
                task->object_starts.resize(idx + 1, Eigen::Vector2d::Zero());
                task->object_goals.resize(idx + 1, Eigen::Vector2d::Zero());
            }
            return idx;
        };
        if (key == "role") task->role = value;
        else if (key.rfind("object", 0) == 0) task->object_starts[slot("object")] = parse_vec2(value);
        else if (key.rfind("goal", 0) == 0) task->object_goals[slot("goal")] = parse_vec2(value);
        else throw std::runtime_error("config: unknown task key '" + key + "'");
    }
};

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);

    ExperimentConfig cfg = default_config();
    cfg.tasks.clear();  // the file's task sections define the task set
    KeyRef ref{cfg};

    std::string line, section;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config: bad section at line " + std::to_string(line_no));
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value at line " + std::to_string(line_no));
        ref.apply(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    if (cfg.tasks.empty()) cfg.tasks = default_config().tasks;
    return cfg;
}

void write_config(const std::string& path, const ExperimentConfig& cfg) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << cfg.serialize();
}

}  // namespace primix
