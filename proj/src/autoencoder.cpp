#include "voxnox/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "voxnox/io.hpp"
#include "voxnox/random.hpp"

namespace voxnox {

namespace {

constexpr std::size_t kInferenceChunk = 32;

int pooled_size(int size) {
    for (int i = 0; i < 3; ++i)
        size = (size + 1) / 2;
    return size;
}

template <typename L, typename... Args>
std::unique_ptr<nn::Layer<float>> make(Args&&... args) {
    return std::make_unique<L>(std::forward<Args>(args)...);
}

} // namespace

void AutoencoderConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::invalid_argument, "autoencoder: " + msg); };
    if (lattice_size < 2)
        fail("lattice_size must be >= 2");
    if (latent_dim < 1)
        fail("latent_dim must be >= 1");
    for (int w : widths)
        if (w < 1)
            fail("widths must be positive");
    if (head_width < 1)
        fail("head_width must be positive");
    if (epochs < 0)
        fail("epochs must be >= 0");
    if (batch_size < 1)
        fail("batch_size must be >= 1");
    if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
        !(adam.eps > 0.0))
        fail("invalid Adam options");
}

nlohmann::json autoencoder_config_to_json(const AutoencoderConfig& cfg) {
    return {
        {"lattice_size", cfg.lattice_size},
        {"latent_dim", cfg.latent_dim},
        {"widths", cfg.widths},
        {"head_width", cfg.head_width},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"adam", {{"lr", cfg.adam.lr}, {"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}}},
    };
}

AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw Error(ErrorCode::format, "autoencoder: expected a JSON object");
    AutoencoderConfig cfg;
    auto get = [](const nlohmann::json& obj, const std::string& where, const char* key, auto& field) {
        if (!obj.contains(key))
            return;
        try {
            field = obj.at(key).get<std::decay_t<decltype(field)>>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorCode::format, where + key + ": unexpected value " + obj.at(key).dump());
        }
    };
    auto reject_unknown = [](const nlohmann::json& obj, const std::string& where,
                             std::initializer_list<std::string_view> known) {
        for (const auto& item : obj.items())
            if (std::find(known.begin(), known.end(), item.key()) == known.end())
                throw Error(ErrorCode::format, where + ": unknown field '" + item.key() + "'");
    };
    reject_unknown(j, "autoencoder",
                   {"lattice_size", "latent_dim", "widths", "head_width", "epochs", "batch_size", "adam"});
    get(j, "autoencoder.", "lattice_size", cfg.lattice_size);
    get(j, "autoencoder.", "latent_dim", cfg.latent_dim);
    get(j, "autoencoder.", "widths", cfg.widths);
    get(j, "autoencoder.", "head_width", cfg.head_width);
    get(j, "autoencoder.", "epochs", cfg.epochs);
    get(j, "autoencoder.", "batch_size", cfg.batch_size);
    if (j.contains("adam")) {
        const auto& a = j.at("adam");
        if (!a.is_object())
            throw Error(ErrorCode::format, "autoencoder.adam: expected a JSON object");
        reject_unknown(a, "autoencoder.adam", {"lr", "beta1", "beta2", "eps"});
        get(a, "autoencoder.adam.", "lr", cfg.adam.lr);
        get(a, "autoencoder.adam.", "beta1", cfg.adam.beta1);
        get(a, "autoencoder.adam.", "beta2", cfg.adam.beta2);
        get(a, "autoencoder.adam.", "eps", cfg.adam.eps);
    }
    cfg.validate();
    return cfg;
}

AutoencoderModel::AutoencoderModel(AutoencoderConfig cfg, std::uint64_t init_seed)
    : cfg_(cfg), init_seed_(init_seed) {
    cfg_.validate();
    const std::size_t c0 = cfg_.widths[0], c1 = cfg_.widths[1], c2 = cfg_.widths[2];
    const std::size_t head = cfg_.head_width;
    const std::size_t latent = cfg_.latent_dim;
    const std::size_t size = cfg_.lattice_size;
    const std::size_t bottom = pooled_size(cfg_.lattice_size);
    const std::size_t flat = c2 * bottom * bottom * bottom;

    auto first = std::make_unique<nn::Conv3d<float>>("enc.conv1", kMaterialCount, c0, 3, 1);
    first->set_input_grad(false);
    encoder_.add(std::move(first));
    encoder_.add(make<nn::ReLU<float>>());
    encoder_.add(make<nn::MaxPool3d<float>>());
    encoder_.add(make<nn::Conv3d<float>>("enc.conv2", c0, c1, 3, 1));
    encoder_.add(make<nn::ReLU<float>>());
    encoder_.add(make<nn::MaxPool3d<float>>());
    encoder_.add(make<nn::Conv3d<float>>("enc.conv3", c1, c2, 3, 1));
    encoder_.add(make<nn::ReLU<float>>());
    encoder_.add(make<nn::MaxPool3d<float>>());
    encoder_.add(make<nn::Reshape<float>>(nn::Shape{flat}));
    encoder_.add(make<nn::Dense<float>>("enc.latent", flat, latent));

    decoder_.add(make<nn::Dense<float>>("dec.expand", latent, flat));
    decoder_.add(make<nn::ReLU<float>>());
    decoder_.add(make<nn::Reshape<float>>(nn::Shape{c2, bottom, bottom, bottom}));
    decoder_.add(make<nn::UpConv3d<float>>("dec.conv1", c2, c1));
    decoder_.add(make<nn::ReLU<float>>());
    decoder_.add(make<nn::UpConv3d<float>>("dec.conv2", c1, c0));
    decoder_.add(make<nn::ReLU<float>>());
    decoder_.add(make<nn::UpConv3d<float>>("dec.conv3", c0, head));
    decoder_.add(make<nn::CenterCrop3d<float>>(size));
    decoder_.add(make<nn::ReLU<float>>());
    decoder_.add(make<nn::Conv3d<float>>("dec.logits", head, kMaterialCount, 1, 0));

    reinitialize();
}

void AutoencoderModel::reinitialize() {
    Rng rng(init_seed_);
    encoder_.initialize(rng);
    decoder_.initialize(rng);
    record_ = TrainingRecord{};
}

void AutoencoderModel::check_lattice(const MaterialLattice& lattice) const {
    const Dims d = lattice.dims();
    const int s = cfg_.lattice_size;
    if (d.x != s || d.y != s || d.z != s)
        throw Error(ErrorCode::dimension_mismatch, "model expects " + std::to_string(s) + "^3 lattices, got " +
                                                       std::to_string(d.x) + "x" + std::to_string(d.y) + "x" +
                                                       std::to_string(d.z));
}

nn::Tensor<float> AutoencoderModel::batch_input(std::span<const MaterialLattice> lattices) const {
    const std::size_t s = cfg_.lattice_size;
    const std::size_t volume = s * s * s;
    nn::Tensor<float> x({lattices.size(), std::size_t(kMaterialCount), s, s, s});
    for (std::size_t n = 0; n < lattices.size(); ++n) {
        check_lattice(lattices[n]);
        float* out = x.data() + n * kMaterialCount * volume;
        const auto& cells = lattices[n].cells();
        for (std::size_t i = 0; i < volume; ++i)
            out[std::size_t(cells[i]) * volume + i] = 1.0f;
    }
    return x;
}

LatentVector AutoencoderModel::encode(const MaterialLattice& lattice) const {
    return encode_batch(std::span<const MaterialLattice>(&lattice, 1)).front();
}

std::vector<LatentVector> AutoencoderModel::encode_batch(std::span<const MaterialLattice> lattices) const {
    std::vector<LatentVector> out;
    out.reserve(lattices.size());
    for (std::size_t start = 0; start < lattices.size(); start += kInferenceChunk) {
        const auto chunk = lattices.subspan(start, std::min(kInferenceChunk, lattices.size() - start));
        const nn::Tensor<float> z = encoder_.infer(batch_input(chunk));
        const std::size_t dim = cfg_.latent_dim;
        for (std::size_t n = 0; n < chunk.size(); ++n)
            out.emplace_back(z.data() + n * dim, z.data() + (n + 1) * dim);
    }
    return out;
}

MaterialLattice AutoencoderModel::reconstruct(const MaterialLattice& lattice) const {
    return reconstruct_batch(std::span<const MaterialLattice>(&lattice, 1)).front();
}

std::vector<MaterialLattice> AutoencoderModel::reconstruct_batch(std::span<const MaterialLattice> lattices) const {
    std::vector<MaterialLattice> out;
    out.reserve(lattices.size());
    const std::size_t s = cfg_.lattice_size;
    const std::size_t per_sample = kMaterialCount * s * s * s;
    for (std::size_t start = 0; start < lattices.size(); start += kInferenceChunk) {
        const auto chunk = lattices.subspan(start, std::min(kInferenceChunk, lattices.size() - start));
        const nn::Tensor<float> logits = decoder_.infer(encoder_.infer(batch_input(chunk)));
        for (std::size_t n = 0; n < chunk.size(); ++n)
            out.push_back(from_scores(chunk[n].dims(),
                                      std::span<const float>(logits.data() + n * per_sample, per_sample)));
    }
    return out;
}

const TrainingRecord& AutoencoderModel::train(std::span<const MaterialLattice> lattices, std::uint64_t shuffle_seed) {
    if (lattices.empty())
        throw Error(ErrorCode::empty_input, "training set is empty");
    for (const auto& l : lattices)
        check_lattice(l);

    reinitialize();
    record_.samples = lattices.size();
    record_.data_fingerprint = data_fingerprint(lattices);
    record_.shuffle_seed = shuffle_seed;

    std::vector<nn::Parameter<float>*> params = encoder_.parameters();
    for (auto* p : decoder_.parameters())
        params.push_back(p);

    Rng rng(shuffle_seed);
    std::vector<std::size_t> order(lattices.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    long step = 0;
    std::vector<MaterialLattice> batch;

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
            const std::size_t end = std::min(order.size(), start + std::size_t(cfg_.batch_size));
            batch.clear();
            for (std::size_t i = start; i < end; ++i)
                batch.push_back(lattices[order[i]]);
            const nn::Tensor<float> x = batch_input(batch);

            encoder_.zero_grad();
            decoder_.zero_grad();
            const nn::Tensor<float> logits = decoder_.forward(encoder_.forward(x));
            auto loss = nn::softmax_ce_loss(logits, x);
            encoder_.backward(decoder_.backward(loss.grad));
            nn::adam_step<float>(params, step, cfg_.adam);
            total += loss.loss * double(end - start);
        }
        record_.loss_history.push_back(total / double(order.size()));
    }
    encoder_.release_cache();
    decoder_.release_cache();
    return record_;
}

std::vector<nn::NamedTensor> AutoencoderModel::weights() const {
    std::vector<nn::NamedTensor> out;
    for (const auto* net : {&encoder_, &decoder_})
        for (const auto* p : net->parameters())
            out.push_back({p->name, p->value});
    return out;
}

void AutoencoderModel::set_weights(std::span<const nn::NamedTensor> tensors) {
    std::vector<nn::Parameter<float>*> params = encoder_.parameters();
    for (auto* p : decoder_.parameters())
        params.push_back(p);
    if (tensors.size() != params.size())
        throw Error(ErrorCode::format, "weight file holds " + std::to_string(tensors.size()) + " tensors, model has " +
                                           std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (tensors[i].name != params[i]->name)
            throw Error(ErrorCode::format, "weight tensor " + std::to_string(i) + " is '" + tensors[i].name +
                                               "', expected '" + params[i]->name + "'");
        if (tensors[i].tensor.shape() != params[i]->value.shape())
            throw Error(ErrorCode::dimension_mismatch,
                        "weight '" + params[i]->name + "' has shape " + nn::shape_string(tensors[i].tensor.shape()) +
                            ", expected " + nn::shape_string(params[i]->value.shape()));
    }
    for (std::size_t i = 0; i < params.size(); ++i)
        params[i]->value = tensors[i].tensor;
}

nlohmann::json AutoencoderModel::manifest() const {
    return {
        {"format", "voxnox-autoencoder"},
        {"version", 1},
        {"architecture", autoencoder_config_to_json(cfg_)},
        {"init_seed", init_seed_},
        {"shuffle_seed", record_.shuffle_seed},
        {"epochs_trained", record_.loss_history.size()},
        {"training_samples", record_.samples},
        {"data_fingerprint", record_.data_fingerprint},
        {"loss_history", record_.loss_history},
        {"weights", "model.bin"},
    };
}

void AutoencoderModel::save(const std::filesystem::path& dir) const {
    const auto w = weights();
    write_file_atomic((dir / "model.bin").string(), nn::encode_weights(w));
    write_file_atomic((dir / "model.json").string(), manifest().dump(2) + "\n");
}

AutoencoderModel AutoencoderModel::load(const std::filesystem::path& dir) {
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(read_file((dir / "model.json").string()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, (dir / "model.json").string() + ": " + e.what());
    }
    try {
        AutoencoderModel model(autoencoder_config_from_json(m.at("architecture")), m.at("init_seed").get<std::uint64_t>());
        const auto tensors = nn::decode_weights(read_file((dir / m.value("weights", "model.bin")).string()));
        model.set_weights(tensors);
        model.record_.shuffle_seed = m.value("shuffle_seed", std::uint64_t{0});
        model.record_.samples = m.value("training_samples", std::size_t{0});
        model.record_.data_fingerprint = m.value("data_fingerprint", std::uint64_t{0});
        model.record_.loss_history = m.value("loss_history", std::vector<double>{});
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::format, (dir / "model.json").string() + ": " + e.what());
    }
}

double reconstruction_error(const MaterialLattice& original, const MaterialLattice& reconstructed) {
    if (original.dims().x != reconstructed.dims().x || original.dims().y != reconstructed.dims().y ||
        original.dims().z != reconstructed.dims().z)
        throw Error(ErrorCode::dimension_mismatch, "lattices differ in size");
    const auto& a = original.cells();
    const auto& b = reconstructed.cells();
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        wrong += a[i] != b[i];
    return 100.0 * double(wrong) / double(a.size());
}

double reconstruction_error(const AutoencoderModel& model, std::span<const MaterialLattice> lattices) {
    if (lattices.empty())
        throw Error(ErrorCode::empty_input, "no lattices to reconstruct");
    const auto rebuilt = model.reconstruct_batch(lattices);
    double sum = 0.0;
    for (std::size_t i = 0; i < lattices.size(); ++i)
        sum += reconstruction_error(lattices[i], rebuilt[i]);
    return sum / double(lattices.size());
}

std::uint64_t data_fingerprint(std::span<const MaterialLattice> lattices) {
    std::uint64_t h = splitmix64(lattices.size());
    for (const auto& l : lattices)
        h = splitmix64(h ^ fingerprint(l));
    return h;
}

} // namespace voxnox
