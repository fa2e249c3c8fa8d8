#include "splitsim/model_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "nlohmann/json.hpp"

#include "splitsim/errors.hpp"

namespace splitsim {

using json = nlohmann::json;

ModelGraph::ModelGraph(std::vector<LayerProfile> layers, double backward_flops_factor)
    : layers_(std::move(layers)), backward_flops_factor_(backward_flops_factor) {
    predecessors_.resize(layers_.size());
    for (std::size_t i = 1; i < layers_.size(); ++i) {
        predecessors_[i] = {static_cast<int>(i)}; // linear chain: id i feeds id i+1
    }
    validate();
    for (const auto& l : layers_) total_param_bytes_ += l.param_bytes;
}

ModelGraph::ModelGraph(std::vector<LayerProfile> layers, std::vector<std::vector<int>> predecessors,
                       double backward_flops_factor)
    : layers_(std::move(layers)), predecessors_(std::move(predecessors)),
      backward_flops_factor_(backward_flops_factor) {
    validate();
    for (const auto& l : layers_) total_param_bytes_ += l.param_bytes;
}

void ModelGraph::validate() const {
    if (layers_.empty()) throw std::invalid_argument("model graph needs at least one layer");
    if (predecessors_.size() != layers_.size())
        throw std::invalid_argument("predecessor table size must match layer count");
    if (backward_flops_factor_ < 0.0)
        throw std::invalid_argument("backward_flops_factor must be >= 0");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.id != static_cast<int>(i) + 1)
            throw std::invalid_argument("layer ids must form a contiguous 1..V sequence");
        if (l.flops_forward < 0.0 || l.grad_state_multiplier < 0.0)
            throw std::invalid_argument("layer cost fields must be nonnegative");
        if (i > 0 && predecessors_[i].empty())
            throw std::invalid_argument("every non-first layer needs at least one predecessor");
        for (int p : predecessors_[i]) {
            // Predecessors must have lower ids, which keeps execution order
            // topological and the edge set acyclic.
            if (p < 1 || p >= l.id)
                throw std::invalid_argument("layer " + std::to_string(l.id) +
                                            " has an invalid predecessor " + std::to_string(p));
        }
    }
    if (!predecessors_[0].empty())
        throw std::invalid_argument("the first layer cannot have predecessors");
}

const LayerProfile& ModelGraph::layer(int id) const {
    if (id < 1 || id > layer_count())
        throw std::out_of_range("layer id " + std::to_string(id) + " out of range 1.." +
                                std::to_string(layer_count()));
    return layers_[static_cast<std::size_t>(id - 1)];
}

const std::vector<int>& ModelGraph::predecessors(int id) const {
    if (id < 1 || id > layer_count())
        throw std::out_of_range("layer id " + std::to_string(id) + " out of range 1.." +
                                std::to_string(layer_count()));
    return predecessors_[static_cast<std::size_t>(id - 1)];
}

std::uint64_t ModelGraph::optimizer_bytes(int id) const {
    const auto& l = layer(id);
    return static_cast<std::uint64_t>(
        std::llround(static_cast<double>(l.param_bytes) * l.grad_state_multiplier));
}

std::uint64_t ModelGraph::param_bytes_through(int cut) const {
    if (cut < 1 || cut > layer_count()) throw std::out_of_range("cut layer out of range");
    std::uint64_t total = 0;
    for (int i = 1; i <= cut; ++i) total += layer(i).param_bytes;
    return total;
}

std::uint64_t ModelGraph::param_and_optimizer_bytes_through(int cut) const {
    if (cut < 1 || cut > layer_count()) throw std::out_of_range("cut layer out of range");
    std::uint64_t total = 0;
    for (int i = 1; i <= cut; ++i) total += layer(i).param_bytes + optimizer_bytes(i);
    return total;
}

std::uint64_t inference_memory(const ModelGraph& graph, int batch) {
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    std::uint64_t max_act = 0;
    for (const auto& l : graph.layers()) max_act = std::max(max_act, l.activation_bytes);
    return graph.total_param_bytes() + static_cast<std::uint64_t>(batch) * max_act;
}

std::uint64_t training_memory(const ModelGraph& graph, int batch) {
    return device_side_memory(graph, graph.layer_count(), batch);
}

std::uint64_t device_side_memory(const ModelGraph& graph, int cut, int batch) {
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (cut < 1 || cut > graph.layer_count())
        throw std::out_of_range("cut layer " + std::to_string(cut) + " out of range 1.." +
                                std::to_string(graph.layer_count()));
    std::uint64_t act = 0;
    for (int i = 1; i <= cut; ++i) act += graph.layer(i).activation_bytes;
    return graph.param_and_optimizer_bytes_through(cut) + static_cast<std::uint64_t>(batch) * act;
}

std::uint64_t cut_activation_bytes(const ModelGraph& graph, int cut, int batch) {
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    return static_cast<std::uint64_t>(batch) * graph.layer(cut).activation_bytes;
}

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (allowed.find(it.key()) == allowed.end())
            throw ConfigError(where + "." + it.key(), "unknown key");
    }
}

} // namespace

ModelGraph load_model_profile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open model profile file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("parse error: ") + e.what());
    }
    reject_unknown_keys(doc, {"name", "backward_flops_factor", "layers"}, "model");
    if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty())
        throw ConfigError("model.layers", "required non-empty layer array");

    std::vector<LayerProfile> layers;
    layers.reserve(doc["layers"].size());
    for (const auto& jl : doc["layers"]) {
        reject_unknown_keys(
            jl, {"id", "flops_forward", "param_bytes", "activation_bytes", "grad_state_multiplier"},
            "model.layers");
        LayerProfile l;
        l.id = jl.at("id").get<int>();
        l.flops_forward = jl.at("flops_forward").get<double>();
        l.param_bytes = jl.at("param_bytes").get<std::uint64_t>();
        l.activation_bytes = jl.at("activation_bytes").get<std::uint64_t>();
        l.grad_state_multiplier = jl.value("grad_state_multiplier", 1.0);
        layers.push_back(l);
    }
    double factor = doc.value("backward_flops_factor", 2.0);
    try {
        ModelGraph graph(std::move(layers), factor);
        graph.set_name(doc.value("name", std::string{}));
        return graph;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

} // namespace splitsim
