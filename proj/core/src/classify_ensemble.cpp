#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hemisym/classify.hpp"

namespace hemisym {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw InputError("classifier config: unknown key '" + where + key + "'");
    }
}

} // namespace

EnsembleConfig EnsembleConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("classifier config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InputError("classifier config: expected a JSON object");
    reject_unknown(j, {"svm", "mlp", "gbc"}, "");

    EnsembleConfig c;
    if (j.contains("svm")) {
        const json& s = j["svm"];
        reject_unknown(s, {"c", "gamma"}, "svm.");
        if (s.contains("c")) c.svm_c = s["c"].get<double>();
        if (s.contains("gamma")) c.svm_gamma = s["gamma"].get<double>();
    }
    if (j.contains("gbc")) {
        const json& g = j["gbc"];
        reject_unknown(g, {"n_estimators", "max_depth", "learning_rate"}, "gbc.");
        if (g.contains("n_estimators")) c.gbc_n_estimators = g["n_estimators"].get<int>();
        if (g.contains("max_depth")) c.gbc_max_depth = g["max_depth"].get<int>();
        if (g.contains("learning_rate")) c.gbc_learning_rate = g["learning_rate"].get<double>();
    }
    if (j.contains("mlp")) {
        const json& m = j["mlp"];
        reject_unknown(m, {"learning_rate", "batch_size", "max_epochs", "patience",
                           "val_fraction"}, "mlp.");
        if (m.contains("learning_rate")) c.mlp.learning_rate = m["learning_rate"].get<double>();
        if (m.contains("batch_size")) c.mlp.batch_size = m["batch_size"].get<int>();
        if (m.contains("max_epochs")) c.mlp.max_epochs = m["max_epochs"].get<int>();
        if (m.contains("patience")) c.mlp.patience = m["patience"].get<int>();
        if (m.contains("val_fraction")) c.mlp.val_fraction = m["val_fraction"].get<double>();
    }
    return c;
}

EnsembleConfig EnsembleConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open classifier config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string EnsembleConfig::to_json_text() const {
    json j{
        {"svm", {{"c", svm_c}, {"gamma", svm_gamma}}},
        {"gbc", {{"n_estimators", gbc_n_estimators},
                 {"max_depth", gbc_max_depth},
                 {"learning_rate", gbc_learning_rate}}},
        {"mlp", {{"learning_rate", mlp.learning_rate},
                 {"batch_size", mlp.batch_size},
                 {"max_epochs", mlp.max_epochs},
                 {"patience", mlp.patience},
                 {"val_fraction", mlp.val_fraction}}},
    };
    return j.dump();
}

TrainedEnsemble train_ensemble(const Dataset& data, const EnsembleConfig& config,
                               std::uint64_t seed) {
    data.validate_for_training();
    TrainedEnsemble e;
    e.config = config;
    e.seed = seed;
    e.svm = train_svm(data, config.svm_c, config.svm_gamma);
    e.mlp = train_mlp(data, seed, config.mlp);
    e.gbc = train_gbc(data, config.gbc_n_estimators, config.gbc_max_depth,
                      config.gbc_learning_rate);
    return e;
}

int majority_label(const std::array<int, 3>& votes) {
    return votes[0] + votes[1] + votes[2] >= 2 ? 1 : 0;
}

Prediction predict(const TrainedEnsemble& model, const FeatureVector& fv) {
    if (fv.degenerate) return Prediction{1, {1, 1, 1}, 1.0};
    const FeatureArray x = fv.values();
    for (double v : x)
        if (!std::isfinite(v)) throw InputError("predict: non-finite feature value");

    Prediction p;
    p.votes = {model.svm.predict_label(x), model.mlp.predict_label(x),
               model.gbc.predict_label(x)};
    p.label = majority_label(p.votes);
    p.score = (model.svm.score(x) + model.mlp.score(x) + model.gbc.score(x)) / 3.0;
    return p;
}

namespace {

json feature_array_to_json(const FeatureArray& a) { return json(a); }

FeatureArray feature_array_from_json(const json& j) {
    if (!j.is_array() || j.size() != kNumFeatures)
        throw InputError("model artifact: bad feature vector length");
    FeatureArray a;
    for (int i = 0; i < kNumFeatures; ++i) a[i] = j[i].get<double>();
    return a;
}

} // namespace

void save_ensemble(const TrainedEnsemble& model, const std::filesystem::path& path) {
    json svs = json::array();
    for (const FeatureArray& sv : model.svm.support_vectors)
        svs.push_back(feature_array_to_json(sv));

    json trees = json::array();
    for (const GbcTree& t : model.gbc.trees) {
        json nodes = json::array();
        for (const GbcNode& n : t.nodes)
            nodes.push_back({{"feature", n.feature},
                             {"threshold", n.threshold},
                             {"left", n.left},
                             {"right", n.right},
                             {"value", n.value}});
        trees.push_back({{"nodes", nodes}});
    }

    json j{
        {"schema_version", 1},
        {"svm",
         {{"c", model.svm.c},
          {"gamma", model.svm.gamma},
          {"bias", model.svm.bias},
          {"dual_coef", model.svm.dual_coef},
          {"support_vectors", svs}}},
        {"mlp",
         {{"layer_sizes", model.mlp.layer_sizes},
          {"weights", model.mlp.weights},
          {"biases", model.mlp.biases}}},
        {"gbc",
         {{"init_log_odds", model.gbc.init_log_odds},
          {"learning_rate", model.gbc.learning_rate},
          {"trees", trees}}},
        {"config", json::parse(model.config.to_json_text())},
        {"seed", model.seed},
    };

    std::ofstream out(path);
    if (!out) throw IoError("cannot open model artifact for writing: " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing model artifact: " + path.string());
}

TrainedEnsemble load_ensemble(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model artifact: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("model artifact: invalid JSON in " + path.string() + ": " + e.what());
    }
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw InputError("model artifact: unsupported schema version in " + path.string());

    try {
        TrainedEnsemble m;
        const json& s = j.at("svm");
        m.svm.c = s.at("c").get<double>();
        m.svm.gamma = s.at("gamma").get<double>();
        m.svm.bias = s.at("bias").get<double>();
        m.svm.dual_coef = s.at("dual_coef").get<std::vector<double>>();
        for (const json& sv : s.at("support_vectors"))
            m.svm.support_vectors.push_back(feature_array_from_json(sv));

        const json& mm = j.at("mlp");
        m.mlp.layer_sizes = mm.at("layer_sizes").get<std::vector<int>>();
        m.mlp.weights = mm.at("weights").get<std::vector<std::vector<double>>>();
        m.mlp.biases = mm.at("biases").get<std::vector<std::vector<double>>>();

        const json& g = j.at("gbc");
        m.gbc.init_log_odds = g.at("init_log_odds").get<double>();
        m.gbc.learning_rate = g.at("learning_rate").get<double>();
        for (const json& tj : g.at("trees")) {
            GbcTree t;
            for (const json& nj : tj.at("nodes")) {
                GbcNode n;
                n.feature = nj.at("feature").get<int>();
                n.threshold = nj.at("threshold").get<double>();
                n.left = nj.at("left").get<int>();
                n.right = nj.at("right").get<int>();
                n.value = nj.at("value").get<double>();
                t.nodes.push_back(n);
            }
            m.gbc.trees.push_back(std::move(t));
        }

        m.config = EnsembleConfig::from_json_text(j.at("config").dump());
        m.seed = j.at("seed").get<std::uint64_t>();
        return m;
    } catch (const json::exception& e) {
        throw InputError("model artifact: malformed " + path.string() + ": " + e.what());
    }
}

} // namespace hemisym
