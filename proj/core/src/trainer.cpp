#include "hwdnet/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "hwdnet/error.hpp"

namespace hwdnet {

std::string StepRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["lr"] = lr;
  nlohmann::ordered_json terms = nlohmann::ordered_json::object();
  for (const auto& [name, value] : losses) terms[name] = value;
  j["losses"] = terms;
  j["total"] = total;
  return j.dump();
}

LossTerms compute_loss_terms(HwdNetImpl& model, const Batch& batch, const torch::Tensor& rgb_classes,
                             const torch::Tensor& ir_classes, const LossConfig& cfg) {
  auto [rgb, ir] = model.forward_pair(batch.rgb_images, batch.ir_images);
  const auto& sw = cfg.enable;
  LossTerms terms;
  if (sw.wr) terms.wr = weight_restrainer_loss(*model.encoder, *model.restrainer);
  if (sw.id) {
    terms.id = id_loss(rgb.parts.mu, ir.parts.mu, model.heads->id_head, rgb_classes, ir_classes, cfg.reduction);
  }
  if (sw.tri) {
    const bool use_mu = cfg.triplet_input == TripletInput::mu;
    terms.tri = cross_modality_triplet(use_mu ? rgb.parts.mu : rgb.encoded.features,
                                       use_mu ? ir.parts.mu : ir.encoded.features, batch.rgb_labels, batch.ir_labels,
                                       cfg.weights.margin, cfg.reduction);
  }
  if (sw.orient) {
    terms.orient = orientation_loss(rgb.parts.upsilon, ir.parts.upsilon, model.heads->orient_head, batch.rgb_orient,
                                    batch.ir_orient, cfg.reduction);
  }
  if (sw.centroid) {
    terms.centroid = centroid_similarity_loss(rgb.parts.mu, batch.rgb_labels, ir.parts.mu, batch.ir_labels,
                                              cfg.centroid_mode, cfg.similarity, cfg.reduction);
  }
  return terms;
}

ModelSpec model_spec(const TrainConfig& cfg, int num_identities) {
  ModelSpec spec;
  spec.encoder = cfg.encoder;
  spec.plan = cfg.plan;
  spec.restrainer = cfg.restrainer;
  spec.decouple = cfg.decouple;
  spec.num_identities = num_identities;
  return spec;
}

namespace {

Rng seeded_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7472u};
  return Rng(seq);
}

void prepare_runtime(const TrainConfig& cfg) {
  if (cfg.deterministic) {
    torch::set_num_threads(1);
    at::globalContext().setDeterministicAlgorithms(true, false);
  }
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, const DatasetIndex& train_index) : cfg_(std::move(cfg)), rng_(seeded_rng(cfg_.seed)) {
  cfg_.validate();
  prepare_runtime(cfg_);
  torch::manual_seed(cfg_.seed);
  init(train_index);
}

Trainer::Trainer(const Checkpoint& ckpt, const DatasetIndex& train_index, const Settings& overrides) {
  apply_settings(cfg_, ckpt.config);
  apply_settings(cfg_, overrides);
  cfg_.validate();
  prepare_runtime(cfg_);
  torch::manual_seed(cfg_.seed);
  init(train_index);
  if (ckpt.identity_classes != classes_) {
    throw ValidationError("checkpoint was trained on a different identity set (" +
                          std::to_string(ckpt.identity_classes.size()) + " classes, dataset has " +
                          std::to_string(classes_.size()) + ")");
  }

  std::map<std::string, torch::Tensor> params;
  for (const auto& item : model_->named_parameters()) params.emplace(item.key(), item.value());
  for (const auto& [name, buf] : ckpt.optimizer) {
    auto it = params.find(name);
    if (it == params.end() || it->second.sizes() != buf.sizes()) {
      throw CheckpointError("optimizer state entry '" + name + "' does not match the model");
    }
  }
  restore_state(*model_, ckpt.model);
  for (const auto& [name, buf] : ckpt.optimizer) {
    auto state = std::make_unique<torch::optim::SGDParamState>();
    state->momentum_buffer(buf.clone());
    optimizer_->state()[params.at(name).unsafeGetTensorImpl()] = std::move(state);
  }
  std::istringstream in(ckpt.rng_state);
  in >> rng_;
  if (!in) throw CheckpointError("malformed random generator state in checkpoint");
  epoch_ = ckpt.epoch;
  step_ = ckpt.step;
}

void Trainer::init(const DatasetIndex& train_index) {
  for (const auto& r : train_index.records()) {
    if (r.is_test()) throw ValidationError("trainer index contains test records; pass the train split");
  }
  train_index.require_both_modalities("training");
  index_ = train_index;
  classes_ = index_.identities();
  if (classes_.size() < 2) throw ValidationError("training needs at least 2 identities");
  for (std::size_t i = 0; i < classes_.size(); ++i) class_of_[classes_[i]] = static_cast<std::int64_t>(i);
  store_ = std::make_unique<ImageStore>(index_, cfg_.batch.image_height, cfg_.batch.image_width);
  steps_per_epoch_ =
      std::max<int>(1, static_cast<int>(index_.size() / static_cast<std::size_t>(2 * cfg_.batch.images_per_modality())));

  model_ = HwdNet(model_spec(cfg_, static_cast<int>(classes_.size())));
  model_->train();

  std::vector<torch::Tensor> decayed, plain;
  for (const auto& item : model_->named_parameters()) {
    (item.key().rfind("restrainer.", 0) == 0 ? plain : decayed).push_back(item.value());
  }
  auto opts = torch::optim::SGDOptions(cfg_.lr).momentum(cfg_.momentum).weight_decay(cfg_.weight_decay);
  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(decayed, std::make_unique<torch::optim::SGDOptions>(opts));
  if (!plain.empty()) {
    auto no_decay = opts;
    no_decay.weight_decay(0.0);
    groups.emplace_back(plain, std::make_unique<torch::optim::SGDOptions>(no_decay));
  }
  optimizer_ = std::make_unique<torch::optim::SGD>(std::move(groups), opts);
}

void Trainer::apply_lr(double lr) {
  auto& groups = optimizer_->param_groups();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double scale = i == 0 ? 1.0 : cfg_.restrainer_lr_scale;
    static_cast<torch::optim::SGDOptions&>(groups[i].options()).lr(lr * scale);
  }
}

torch::Tensor Trainer::to_classes(const torch::Tensor& identities) const {
  const auto ids = identities.to(torch::kInt64).contiguous();
  auto out = torch::empty_like(ids);
  const auto* src = ids.data_ptr<std::int64_t>();
  auto* dst = out.data_ptr<std::int64_t>();
  for (std::int64_t i = 0; i < ids.numel(); ++i) {
    auto it = class_of_.find(src[i]);
    if (it == class_of_.end()) throw ValidationError("identity " + std::to_string(src[i]) + " has no class");
    dst[i] = it->second;
  }
  return out;
}

StepRecord Trainer::step() {
  const double lr = cfg_.lr_at(epoch_);
  apply_lr(lr);
  const auto batch = sample_balanced_batch(index_, cfg_.batch, rng_, *store_, cfg_.augment);
  model_->train();
  const auto terms = compute_loss_terms(*model_, batch, to_classes(batch.rgb_labels), to_classes(batch.ir_labels),
                                        cfg_.loss);
  ++step_;
  const auto total = total_loss(terms, cfg_.loss, static_cast<long>(step_));
  optimizer_->zero_grad();
  total.total.backward();
  optimizer_->step();

  StepRecord rec;
  rec.step = step_;
  rec.epoch = epoch_ + 1;
  rec.lr = lr;
  rec.losses = total.breakdown;
  rec.total = total.total.item<double>();
  return rec;
}

std::vector<StepRecord> Trainer::run_epoch() {
  std::vector<StepRecord> out;
  for (int i = 0; i < steps_per_epoch_; ++i) out.push_back(step());
  ++epoch_;
  return out;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.epoch = epoch_;
  ckpt.step = step_;
  ckpt.config = to_settings(cfg_);
  ckpt.identity_classes = classes_;
  std::ostringstream rng;
  rng << rng_;
  ckpt.rng_state = rng.str();
  ckpt.model = capture_state(*model_);
  auto& state = optimizer_->state();
  for (const auto& item : model_->named_parameters()) {
    auto it = state.find(item.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::SGDParamState&>(*it->second);
    if (s.momentum_buffer().defined()) ckpt.optimizer.push_back({item.key(), s.momentum_buffer().detach().clone()});
  }
  return ckpt;
}

std::string report_file_name(const EvalReport& report) {
  return "eval_" + std::string(to_string(report.direction)) + "_" + std::string(to_string(report.shot)) + ".json";
}

std::vector<EvalReport> evaluate_all(HwdNetImpl& model, const DatasetIndex& test_index, const TrainConfig& cfg,
                                     Embeddings* embeddings) {
  ImageStore store(test_index, cfg.batch.image_height, cfg.batch.image_width);
  const auto emb = embed_index(model, store);
  std::vector<EvalReport> out;
  for (Direction d : {Direction::ir2rgb, Direction::rgb2ir}) {
    for (Shot s : {Shot::single, Shot::multi}) out.push_back(evaluate_embeddings(emb, test_index, d, s, cfg.eval));
  }
  if (embeddings) *embeddings = emb;
  return out;
}

namespace {

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

void say(const TrainOptions& options, const std::string& msg) {
  if (options.progress) options.progress(msg);
}

TrainResult run_loop(Trainer& trainer, const DatasetIndex& test, const TrainOptions& options, bool append_log) {
  const auto& cfg = trainer.config();
  const auto& dir = options.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::ofstream log(dir / "train_log.jsonl", append_log ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + (dir / "train_log.jsonl").string());
  std::ofstream eval_log;

  while (!trainer.finished()) {
    const auto records = trainer.run_epoch();
    double total = 0.0;
    for (const auto& r : records) {
      log << r.to_json() << '\n';
      total += r.total;
    }
    log.flush();
    if (!log) throw IoError("failed writing training log");
    const int epoch = trainer.epoch();
    char msg[128];
    std::snprintf(msg, sizeof msg, "epoch %d/%d  lr %.4g  mean loss %.4f", epoch, cfg.epochs, records.back().lr,
                  total / static_cast<double>(records.size()));
    say(options, msg);

    if (epoch < cfg.epochs && options.write_checkpoints && cfg.checkpoint_every > 0 &&
        epoch % cfg.checkpoint_every == 0) {
      save_checkpoint(trainer.checkpoint(), dir / ("checkpoint_epoch" + std::to_string(epoch) + ".bin"));
    }
    if (epoch < cfg.epochs && cfg.eval_every > 0 && epoch % cfg.eval_every == 0 && !test.empty()) {
      ImageStore store(test, cfg.batch.image_height, cfg.batch.image_width);
      const auto r = evaluate_protocol(trainer.model(), store, Direction::ir2rgb, Shot::single, cfg.eval);
      if (!eval_log.is_open()) eval_log.open(dir / "eval_log.jsonl", std::ios::app);
      nlohmann::ordered_json j{{"epoch", epoch}, {"direction", "ir2rgb"}, {"shot", "single"},
                               {"rank1", r.rank(1)}, {"map", r.map}};
      eval_log << j.dump() << '\n';
      std::snprintf(msg, sizeof msg, "  eval ir2rgb single  rank-1 %.4f  mAP %.4f", r.rank(1), r.map);
      say(options, msg);
    }
  }

  TrainResult result;
  result.final_checkpoint = trainer.checkpoint();
  if (options.write_checkpoints) save_checkpoint(result.final_checkpoint, dir / "checkpoint.bin");
  if (options.final_eval && !test.empty()) {
    Embeddings emb;
    result.reports = evaluate_all(trainer.model(), test, cfg, &emb);
    for (const auto& r : result.reports) write_text(dir / report_file_name(r), r.to_json());
    write_embeddings_tsv(emb, dir / "embeddings.tsv");
  }
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const DatasetIndex& index, const TrainOptions& options) {
  Trainer trainer(cfg, index.train_subset());
  return run_loop(trainer, index.test_subset(), options, false);
}

TrainResult resume(const Checkpoint& ckpt, const Settings& overrides, const DatasetIndex& index,
                   const TrainOptions& options) {
  Trainer trainer(ckpt, index.train_subset(), overrides);
  return run_loop(trainer, index.test_subset(), options, true);
}

}  // namespace hwdnet
