#include "support.hpp"

#include "mobiload/checkpoint.hpp"
#include "mobiload/selfcheck.hpp"
#include "mobiload/training.hpp"

#include <algorithm>
#include <cstring>

using namespace testing;

namespace {

// Short spans can be dry throughout, so precipitation is left out.
const std::vector<std::string> kChannels = {"temp_c", "cloud_pct", "pressure_hpa"};

// Normalized samples of one small synthetic region.
SampleSet region_samples(const RegionSeries& s, int H = 2, int days = 10) {
    const DateRange span{s.span.first + std::chrono::days{1}, s.span.first + std::chrono::days{days}};
    const NormalizationState n = fit_normalizer(s, span, kChannels);
    return build_samples(s, n, {H, true}, span);
}

TrainingConfig quick_config(int epochs = 5) {
    TrainingConfig c;
    c.epochs = epochs;
    c.batch_size = 32;
    c.learning_rate = 1e-3;
    c.mape_epsilon = 0.05;
    c.fine_tune_epochs = 3;
    return c;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MultiTaskModel with_layouts(MultiTaskModel m, const std::vector<const SampleSet*>& sets) {
    for (std::size_t j = 0; j < sets.size(); ++j) m.heads[j].layout = sets[j]->layout;
    return m;
}

}  // namespace

TEST_CASE("mape: hand cases and errors") {
    const std::vector<double> t = {0.5, 0.25};
    CHECK(mape(t, t, 1e-3) == 0.0);
    CHECK(mape(std::vector<double>{1.1}, std::vector<double>{1.0}, 1e-3) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(mape(std::vector<double>{0.55, 0.2}, t, 1e-3) == doctest::Approx(15.0).epsilon(1e-12));
    // Below the floor the denominator is epsilon.
    CHECK(mape(std::vector<double>{0.01}, std::vector<double>{0.0}, 0.1) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(error_kind_of([] { mape(std::vector<double>{}, std::vector<double>{}, 1e-3); }) == ErrorKind::EmptyInput);
}

TEST_CASE("training config validation") {
    TrainingConfig c;
    CHECK_NOTHROW(c.validate());
    c.batch_size = 0;
    CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
    c = TrainingConfig{};
    c.epochs = 0;
    CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
    c = TrainingConfig{};
    c.learning_rate = -1e-3;
    CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
    c = TrainingConfig{};
    c.mape_epsilon = 0.0;
    CHECK(error_kind_of([&] { c.validate(); }) == ErrorKind::InvalidConfig);
    CHECK(TrainingConfig{}.to_json().at("optimizer") == "adam");
}

TEST_CASE("train_single: zero learning rate, determinism, log shape") {
    const SyntheticDataset data = small_synthetic(2, 20, 1);
    const SampleSet set = region_samples(data.regions[0]);
    const ArchitectureSpec spec = ArchitectureSpec::make(set.dimension(), {16, 8}, Activation::ReLU, 0.1, 1);
    const NetworkParams init = init_params(spec, 3);

    TrainingConfig c = quick_config(3);
    for (Optimizer opt : {Optimizer::Adam, Optimizer::SGD}) {
        c.optimizer = opt;
        c.learning_rate = 0.0;
        CHECK(train_single(init, spec, set, c).params == init);
    }

    c = quick_config(4);
    const SingleTaskResult a = train_single(init, spec, set, c), b = train_single(init, spec, set, c);
    CHECK(a.params == b.params);
    CHECK(a.log.rows == b.log.rows);
    CHECK(a.log.rows.size() == 4);
    CHECK_FALSE(a.params == init);
    for (int e = 0; e < 4; ++e) {
        CHECK(a.log.rows[static_cast<std::size_t>(e)].epoch == e + 1);
        CHECK(a.log.rows[static_cast<std::size_t>(e)].task_id == set.task_id);
    }
    // The logged value is the full-set MAPE of the parameters after that epoch.
    CHECK(a.log.rows.back().train_mape ==
          mape(predict(spec, LayerView(a.params), set.inputs), set.targets, c.mape_epsilon));

    c.seed = 99;
    CHECK_FALSE(train_single(init, spec, set, c).params == a.params);

    TempDir dir("log");
    a.log.write_csv(dir / "log.csv", "{\"seed\":1}");
    const std::string text = read_file(dir / "log.csv");
    CHECK(text.rfind("# {\"seed\":1}\nepoch,task_id,train_mape\n1,region_0,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}

TEST_CASE("train_single: input errors and divergence") {
    const SyntheticDataset data = small_synthetic(2, 20, 1);
    const SampleSet set = region_samples(data.regions[0]);
    const ArchitectureSpec wrong = ArchitectureSpec::make(set.dimension() + 1, {8}, Activation::ReLU, 0.0, 1);
    CHECK(error_kind_of([&] { train_single(init_params(wrong, 1), wrong, set, quick_config()); }) ==
          ErrorKind::DimensionMismatch);
    const SampleSet empty = set.subset({});
    const ArchitectureSpec spec = ArchitectureSpec::make(set.dimension(), {8}, Activation::ReLU, 0.0, 1);
    CHECK(error_kind_of([&] { train_single(init_params(spec, 1), spec, empty, quick_config()); }) ==
          ErrorKind::EmptyInput);

    TrainingConfig c = quick_config(3);
    c.optimizer = Optimizer::SGD;
    c.learning_rate = 1e305;
    c.batch_size = 8;
    const NetworkParams init = init_params(spec, 1);
    try {
        train_single(init, spec, set, c);
        FAIL("expected divergence");
    } catch (const NonFiniteLossError& e) {
        CHECK(e.kind() == ErrorKind::NonFiniteLoss);
        CHECK(e.last_finite().network(set.task_id) == init);
    }
}

TEST_CASE("overfit fixture: below 1 percent, improving, beats the constant predictor") {
    const SampleSet set = overfit_fixture(1);
    CHECK(set.size() == 64);
    CHECK(*std::min_element(set.targets.begin(), set.targets.end()) >= 0.2);
    const ArchitectureSpec spec = overfit_architecture(set.dimension());
    const TrainingConfig c = overfit_config(1);
    CHECK(c.epochs == 500);
    const SingleTaskResult r = train_single(init_params(spec, c.seed), spec, set, c);
    const std::vector<double> series = r.log.mape_series(set.task_id);
    REQUIRE(series.size() == 500);
    CHECK(series.back() < 1.0);

    const std::vector<double> first(series.begin(), series.begin() + 50), last(series.end() - 50, series.end());
    CHECK(median(last) < median(first));

    double mean = 0.0;
    for (double t : set.targets) mean += t / static_cast<double>(set.size());
    const std::vector<double> constant(set.size(), mean);
    CHECK(series.back() < mape(constant, set.targets, c.mape_epsilon));
}

TEST_CASE("multi-task: preconditions") {
    const SyntheticDataset data = small_synthetic(4, 20, 2);
    const SampleSet a = region_samples(data.regions[0]), b = region_samples(data.regions[1]);
    const ArchitectureSpec spec = ArchitectureSpec::make(a.dimension(), {12, 8}, Activation::ReLU, 0.0, 1);
    const MultiTaskModel one = MultiTaskModel::create(spec, {a.task_id}, 1);
    CHECK(error_kind_of([&] { train_multitask(one, {&a}, quick_config()); }) == ErrorKind::InvalidConfig);
    const MultiTaskModel two = MultiTaskModel::create(spec, {a.task_id, b.task_id}, 1);
    CHECK(error_kind_of([&] { train_multitask(two, {&b, &a}, quick_config()); }) == ErrorKind::InvalidConfig);
    CHECK(error_kind_of([] { MultiTaskModel::create(ArchitectureSpec::make(3, {2}, Activation::ReLU, 0.0, 1), {"x", "x"}, 1); }) ==
          ErrorKind::InvalidConfig);

    MultiTaskModel mismatched = with_layouts(two, {&a, &b});
    const SampleSet no_mob = build_samples(data.regions[1], fit_normalizer(data.regions[1], data.span, kChannels), {2, false},
                                           {data.span.first + std::chrono::days{1}, data.span.last});
    mismatched.heads[1].layout = no_mob.layout;
    CHECK(error_kind_of([&] { train_multitask(mismatched, {&a, &b}, quick_config()); }) == ErrorKind::LayoutMismatch);
    CHECK(error_kind_of([&] { two.head("zzz"); }) == ErrorKind::UnknownTask);
}

TEST_CASE("multi-task: identical tasks give equal heads, one shared trunk") {
    const SyntheticDataset data = small_synthetic(5, 20, 1);
    SampleSet a = region_samples(data.regions[0]);
    SampleSet b = a;
    b.task_id = "twin";
    const ArchitectureSpec spec = ArchitectureSpec::make(a.dimension(), {12, 8, 6}, Activation::ReLU, 0.1, 2);
    const MultiTaskModel init = with_layouts(MultiTaskModel::create(spec, {a.task_id, b.task_id}, 7), {&a, &b});
    const MultiTaskResult r = train_multitask(init, {&a, &b}, quick_config(4));
    CHECK(r.model.heads[0].layers == r.model.heads[1].layers);
    CHECK_FALSE(r.model.heads[0].layers == init.heads[0].layers);
    CHECK_FALSE(r.model.trunk == init.trunk);
    CHECK(&r.model.trunk_for(a.task_id) == &r.model.trunk_for(b.task_id));
    CHECK(serialize_layers(r.model.trunk_for(a.task_id)) == serialize_layers(r.model.trunk_for(b.task_id)));
    CHECK(r.log.rows.size() == 8);
    CHECK(r.log.mape_series(a.task_id) == r.log.mape_series(b.task_id));
}

TEST_CASE("multi-task: four synthetic regions, unequal sizes, deterministic") {
    const SyntheticDataset data = small_synthetic(6, 24, 4);
    std::vector<SampleSet> sets;
    for (std::size_t r = 0; r < 4; ++r) sets.push_back(region_samples(data.regions[r], 2, 6 + static_cast<int>(r) * 3));
    std::vector<const SampleSet*> ptrs;
    std::vector<std::string> ids;
    for (const auto& s : sets) {
        ptrs.push_back(&s);
        ids.push_back(s.task_id);
    }
    const ArchitectureSpec spec = ArchitectureSpec::make(sets[0].dimension(), {16, 8}, Activation::ReLU, 0.0, 1);
    const MultiTaskModel init = with_layouts(MultiTaskModel::create(spec, ids, 3), ptrs);
    const MultiTaskResult a = train_multitask(init, ptrs, quick_config(3));
    const MultiTaskResult b = train_multitask(init, ptrs, quick_config(3));
    CHECK(a.model == b.model);
    CHECK(a.log.rows == b.log.rows);
    CHECK(a.log.rows.size() == 12);
    const std::string trunk = serialize_layers(a.model.trunk);
    for (const auto& id : ids) {
        CHECK(serialize_layers(a.model.trunk_for(id)) == trunk);
        CHECK(a.model.network(id).layers.front() == a.model.trunk.front());
    }
    for (std::size_t j = 1; j < 4; ++j) CHECK_FALSE(a.model.heads[j].layers == a.model.heads[0].layers);
}

TEST_CASE("fine-tune: frozen trunk, isolated heads, zero epochs") {
    const SyntheticDataset data = small_synthetic(8, 20, 2);
    const SampleSet a = region_samples(data.regions[0]), b = region_samples(data.regions[1]);
    const ArchitectureSpec spec = ArchitectureSpec::make(a.dimension(), {12, 8, 6}, Activation::ReLU, 0.1, 2);
    const MultiTaskModel co =
        train_multitask(with_layouts(MultiTaskModel::create(spec, {a.task_id, b.task_id}, 2), {&a, &b}), {&a, &b},
                        quick_config(2))
            .model;

    TrainingConfig c = quick_config();
    c.fine_tune_epochs = 0;
    CHECK(fine_tune(co, a.task_id, a, c).model == co);

    c.fine_tune_epochs = 4;
    const MultiTaskResult ft = fine_tune(co, a.task_id, a, c);
    CHECK(serialize_layers(ft.model.trunk) == serialize_layers(co.trunk));
    CHECK(serialize_layers(ft.model.head(b.task_id).layers) == serialize_layers(co.head(b.task_id).layers));
    CHECK_FALSE(ft.model.head(a.task_id).layers == co.head(a.task_id).layers);
    CHECK(ft.log.rows.size() == 4);
    CHECK(fine_tune(co, a.task_id, a, c).model == ft.model);
    // The logged MAPE is that of the full model after each epoch.
    CHECK(ft.log.rows.back().train_mape == doctest::Approx(mape(ft.model.predict(a.task_id, a.inputs), a.targets,
                                                                c.mape_epsilon)).epsilon(1e-12));
    CHECK(error_kind_of([&] { fine_tune(co, "nope", a, c); }) == ErrorKind::UnknownTask);
}

TEST_CASE("checkpoint: bit-exact round trip, trunk stored once") {
    const SyntheticDataset data = small_synthetic(9, 20, 2);
    const SampleSet a = region_samples(data.regions[0]), b = region_samples(data.regions[1]);
    const ArchitectureSpec spec = ArchitectureSpec::make(a.dimension(), {10, 6}, Activation::Sigmoid, 0.2, 1);
    MultiTaskModel m = with_layouts(MultiTaskModel::create(spec, {a.task_id, b.task_id}, 4), {&a, &b});
    m.heads[0].normalizer = fit_normalizer(data.regions[0], data.span, kChannels);
    m.heads[1].normalizer = fit_normalizer(data.regions[1], data.span, kChannels);
    // Awkward values: subnormal, negative zero, extremes.
    m.trunk[0].weights(0, 0) = 4.9e-324;
    m.trunk[0].weights(0, 1) = -0.0;
    m.trunk[0].bias(0) = 1.7976931348623157e308;
    m.heads[1].layers[0].bias(0) = 0.1 + 0.2;

    Checkpoint ck;
    ck.metadata = {{"variant", "Mobi_MTL"}, {"seed", 4}};
    ck.models.push_back(m);
    ck.models.push_back(MultiTaskModel::from_network(spec, init_params(spec, 5), "solo"));

    const std::string bytes = serialize(ck);
    const Checkpoint back = deserialize(bytes, "mem");
    CHECK(back == ck);
    CHECK(serialize(back) == bytes);
    CHECK(std::signbit(back.models[0].trunk[0].weights(0, 1)));
    CHECK(&back.model_for("solo") == &back.models[1]);
    CHECK(back.model_for(b.task_id).head(b.task_id).layout == b.layout);
    CHECK(error_kind_of([&] { back.model_for("zzz"); }) == ErrorKind::UnknownTask);

    std::uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + 8, 8);
    const std::size_t trunk_n = spec.widths[0] * 10 + 10;
    const std::size_t head_n = 10 * 6 + 6 + 6 + 1;
    CHECK(bytes.substr(0, 4) == "MLCK");
    CHECK(bytes.size() == 16 + header_len + 8 * (trunk_n + 2 * head_n) + 8 * spec.parameter_count());

    TempDir dir("ckpt");
    save_checkpoint(ck, dir / "m.ckpt");
    CHECK(read_file(dir / "m.ckpt") == bytes);
    CHECK(load_checkpoint(dir / "m.ckpt") == ck);
    CHECK(error_kind_of([&] { load_checkpoint(dir / "missing.ckpt"); }) == ErrorKind::MissingCheckpoint);
    CHECK(error_kind_of([&] { deserialize(bytes.substr(0, bytes.size() - 1), "t"); }) == ErrorKind::CorruptCheckpoint);
    CHECK(error_kind_of([&] { deserialize(bytes + "x", "t"); }) == ErrorKind::CorruptCheckpoint);
    CHECK(error_kind_of([&] { deserialize("MLCX" + bytes.substr(4), "t"); }) == ErrorKind::CorruptCheckpoint);
    std::string tampered = bytes;
    const auto pos = tampered.find("\"layout_hash\":");
    REQUIRE(pos != std::string::npos);
    tampered[pos + 15] = tampered[pos + 15] == '1' ? '2' : '1';
    CHECK(error_kind_of([&] { deserialize(tampered, "t"); }) == ErrorKind::CorruptCheckpoint);
}

TEST_CASE("architecture and normalizer JSON round-trip") {
    const ArchitectureSpec spec = ArchitectureSpec::make(7, {5, 3}, Activation::Sigmoid, 0.25, 2);
    CHECK(architecture_from_json(to_json(spec)) == spec);
    const SyntheticDataset data = small_synthetic(1, 20, 1);
    const NormalizationState n = fit_normalizer(data.regions[0], data.span, kChannels);
    CHECK(normalizer_from_json(to_json(n)) == n);
}
