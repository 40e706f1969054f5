// Copyright 2026 The defex Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "defex/commands.h"
#include "defex/corpus.h"
#include "defex/encoder.h"
#include "defex/eval.h"
#include "defex/inference.h"
#include "defex/synthetic.h"
#include "defex/training.h"
#include "defex/warming.h"

namespace py = pybind11;

namespace {

defex::Json FromPy(const py::object& obj) {
  const std::string text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return defex::Json::parse(text);
}

defex::RunConfig ConfigFromPy(const py::dict& config) {
  return defex::RunConfigFromJson(FromPy(config));
}

}  // namespace

PYBIND11_MODULE(_defex, m) {
  m.doc() = "Dual-encoder zero-shot event extraction";

  static py::exception<defex::Error> error(m, "DefexError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const defex::Error& e) {
      py::set_error(error, (std::string(defex::ErrorKindName(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<defex::AlignmentInstance>(m, "AlignmentInstance")
      .def(py::init<>())
      .def_readwrite("sentence", &defex::AlignmentInstance::sentence)
      .def_readwrite("start", &defex::AlignmentInstance::start)
      .def_readwrite("end", &defex::AlignmentInstance::end)
      .def_readwrite("definition", &defex::AlignmentInstance::definition)
      .def_readwrite("definition_id", &defex::AlignmentInstance::definition_id);

  py::class_<defex::AlignmentCorpus>(m, "AlignmentCorpus")
      .def(py::init<>())
      .def_readwrite("instances", &defex::AlignmentCorpus::instances)
      .def_readwrite("definitions", &defex::AlignmentCorpus::definitions)
      .def("validate", &defex::AlignmentCorpus::Validate);

  py::class_<defex::EventType>(m, "EventType")
      .def(py::init<>())
      .def_readwrite("type_name", &defex::EventType::type_name)
      .def_readwrite("definition", &defex::EventType::definition);

  py::class_<defex::EventOntology>(m, "EventOntology")
      .def(py::init<std::vector<defex::EventType>>())
      .def_property_readonly("types", &defex::EventOntology::types)
      .def("index_of", &defex::EventOntology::index_of)
      .def("__len__", &defex::EventOntology::size);

  py::class_<defex::Span>(m, "Span")
      .def(py::init<>())
      .def_readwrite("sentence_idx", &defex::Span::sentence_idx)
      .def_readwrite("start", &defex::Span::start)
      .def_readwrite("end", &defex::Span::end);

  py::class_<defex::Document>(m, "Document")
      .def(py::init<>())
      .def_readwrite("doc_id", &defex::Document::doc_id)
      .def_readwrite("sentences", &defex::Document::sentences)
      .def_readwrite("candidates", &defex::Document::candidates);

  py::class_<defex::MentionSet>(m, "MentionSet")
      .def(py::init<>())
      .def("insert",
           [](defex::MentionSet& s, const std::string& doc_id, int sentence_idx, int start,
              int end, const std::string& type_name, double score) {
             s.Insert(defex::SpanKey{doc_id, sentence_idx, start, end},
                      defex::MentionLabel{type_name, score});
           },
           py::arg("doc_id"), py::arg("sentence_idx"), py::arg("start"), py::arg("end"),
           py::arg("type_name"), py::arg("score") = 0.0)
      .def("records",
           [](const defex::MentionSet& s) {
             py::list out;
             for (const auto& [k, v] : s.records()) {
               out.append(py::make_tuple(k.doc_id, k.sentence_idx, k.start, k.end, v.type_name,
                                         v.score));
             }
             return out;
           })
      .def("__len__", &defex::MentionSet::size);

  m.def("load_alignment_corpus", &defex::LoadAlignmentCorpus);
  m.def("save_alignment_corpus", &defex::SaveAlignmentCorpus);
  m.def("load_ontology", &defex::LoadOntology);
  m.def("save_ontology", &defex::SaveOntology);
  m.def("load_documents", &defex::LoadDocuments);
  m.def("save_documents", &defex::SaveDocuments);
  m.def("load_gold", &defex::LoadGold);
  m.def("save_gold", &defex::SaveGold);
  m.def("load_predictions", &defex::LoadPredictions);
  m.def("save_predictions", &defex::SavePredictions);
  m.def("subsample_per_definition", &defex::SubsamplePerDefinition);

  py::class_<defex::SyntheticData>(m, "SyntheticData")
      .def_readonly("corpus", &defex::SyntheticData::corpus)
      .def_readonly("ontology", &defex::SyntheticData::ontology)
      .def_readonly("documents", &defex::SyntheticData::documents)
      .def_readonly("gold", &defex::SyntheticData::gold);
  m.def(
      "generate_synthetic_corpus",
      [](const py::dict& spec, uint64_t seed) {
        defex::SyntheticSpec s;
        defex::MergeJson(FromPy(spec), s);
        return defex::GenerateSyntheticCorpus(s, seed);
      },
      py::arg("spec") = py::dict(), py::arg("seed") = 0);

  py::class_<defex::DualEncoderModel>(m, "DualEncoderModel")
      .def("fingerprint", &defex::DualEncoderModel::Fingerprint)
      .def("parameter_count", &defex::DualEncoderModel::ParameterCount);
  m.def(
      "initialize_model",
      [](const py::dict& encoder, const defex::AlignmentCorpus& corpus,
         const std::vector<defex::Tokens>& extra, uint64_t seed) {
        defex::EncoderConfig c;
        defex::MergeJson(FromPy(encoder), c);
        return defex::InitializeModel(c, corpus, extra, seed);
      },
      py::arg("encoder"), py::arg("corpus"), py::arg("extra_texts") = std::vector<defex::Tokens>{},
      py::arg("seed") = 0);
  m.def("save_checkpoint", &defex::SaveCheckpoint);
  m.def("load_checkpoint", &defex::LoadCheckpoint);
  m.def("cosine", [](const defex::Vector& u, const defex::Vector& v) { return defex::Cosine(u, v); });
  m.def("encode_definition", [](const defex::DualEncoderModel& model, const defex::Tokens& d) {
    return defex::EncodeDefinition(model, d).values;
  });
  m.def("encode_mention", [](const defex::DualEncoderModel& model, const defex::Tokens& sentence,
                             int start, int end) {
    return defex::PoolMention(defex::EncodeTokens(model, defex::EncoderSide::kContext, sentence),
                              start, end)
        .values;
  });
  m.def(
      "ranking_loss",
      [](const defex::Vector& a, const defex::Vector& pos, const std::vector<defex::Vector>& negs,
         double margin) { return defex::RankingLoss(a, pos, negs, margin); },
      py::arg("anchor"), py::arg("positive"), py::arg("negatives"), py::arg("margin") = 0.2);

  py::class_<defex::TrainReport>(m, "TrainReport")
      .def_readonly("epoch_loss", &defex::TrainReport::epoch_loss)
      .def_readonly("epoch_seconds", &defex::TrainReport::epoch_seconds);
  m.def(
      "pretrain",
      [](const defex::DualEncoderModel& model, const defex::AlignmentCorpus& corpus,
         const py::dict& train) {
        defex::TrainConfig c;
        defex::MergeJson(FromPy(train), c);
        defex::TrainResult r = defex::Pretrain(model, corpus, c);
        return py::make_tuple(std::move(r.model), std::move(r.report));
      },
      py::arg("model"), py::arg("corpus"), py::arg("train") = py::dict());
  m.def(
      "warm",
      [](const defex::DualEncoderModel& model, const defex::EventOntology& ontology,
         const defex::AlignmentCorpus& corpus, const py::dict& warm) {
        defex::TrainConfig c = defex::WarmDefaults();
        defex::MergeJson(FromPy(warm), c);
        const defex::WarmingSubset subset =
            defex::BuildWarmingSubset(model, ontology, corpus, defex::RetrievalConfig{});
        defex::TrainResult r = defex::Warm(model, subset, corpus.definitions, c);
        return py::make_tuple(std::move(r.model), std::move(r.report),
                              std::vector<std::string>(subset.retrieved_ids.begin(),
                                                       subset.retrieved_ids.end()));
      },
      py::arg("model"), py::arg("ontology"), py::arg("corpus"), py::arg("warm") = py::dict());

  py::class_<defex::DefinitionIndex>(m, "DefinitionIndex")
      .def_readonly("vectors", &defex::DefinitionIndex::vectors)
      .def_readonly("model_fingerprint", &defex::DefinitionIndex::model_fingerprint);
  m.def("build_definition_index", [](const defex::DualEncoderModel& model,
                                     const defex::EventOntology& ontology) {
    return defex::BuildDefinitionIndex(model, ontology);
  });
  m.def(
      "extract",
      [](const defex::DualEncoderModel& model, const defex::DefinitionIndex& index,
         const std::vector<defex::Document>& docs, double threshold) {
        defex::InferenceConfig c;
        c.threshold = threshold;
        defex::ExtractResult r = defex::Extract(model, index, docs, c);
        py::dict counters;
        counters["context_encoder_calls"] = r.counter.context_encoder_calls;
        counters["definition_encoder_calls"] = r.counter.definition_encoder_calls;
        return py::make_tuple(std::move(r.predictions), counters);
      },
      py::arg("model"), py::arg("index"), py::arg("documents"), py::arg("threshold") = 0.7);
  m.def("simulate_joint_baseline", [](uint64_t n, uint64_t t) {
    const defex::JointSimulation s = defex::SimulateJointBaseline({}, n, t);
    return py::make_tuple(s.joint_pairs, s.disjoint_calls, s.invocation_ratio);
  });

  m.def(
      "micro_prf",
      [](const defex::PredictionSet& preds, const defex::GoldMentionSet& gold,
         const std::string& mode, const defex::EventOntology& ontology) {
        const defex::EvalMode m = mode == "identification" ? defex::EvalMode::kIdentification
                                                           : defex::EvalMode::kClassification;
        const defex::EvalReport r = defex::MicroPrf(preds, gold, m, ontology);
        py::dict out;
        out["precision"] = r.precision;
        out["recall"] = r.recall;
        out["f1"] = r.f1;
        out["tp"] = r.tp;
        out["fp"] = r.fp;
        out["fn"] = r.fn;
        return out;
      },
      py::arg("predictions"), py::arg("gold"), py::arg("mode"), py::arg("ontology"));
  m.def("chance_baseline", &defex::ChanceBaseline);
  m.def("most_popular_baseline", &defex::MostPopularBaseline);

  m.def(
      "run_command",
      [](const std::string& name, const py::dict& config, const std::string& run_name, bool gold,
         double gold_fraction, bool equal_updates) {
        defex::CommandOptions o;
        o.run_name = run_name;
        o.gold = gold;
        o.gold_fraction = gold_fraction;
        o.equal_updates = equal_updates;
        const defex::RunConfig c = ConfigFromPy(config);
        defex::CommandResult r;
        if (name == "pretrain") {
          r = defex::CmdPretrain(c, o);
        } else if (name == "warm") {
          r = defex::CmdWarm(c, o);
        } else if (name == "infer") {
          r = defex::CmdInfer(c, o);
        } else if (name == "eval") {
          r = defex::CmdEval(c, o);
        } else if (name == "bench") {
          r = defex::CmdBench(c, o);
        } else if (name == "synth") {
          r = defex::CmdSynth(c, o);
        } else {
          throw defex::Error(defex::ErrorKind::kArgument, "unknown command: " + name);
        }
        return r.run_dir;
      },
      py::arg("name"), py::arg("config"), py::arg("run_name") = "", py::arg("gold") = false,
      py::arg("gold_fraction") = 1.0, py::arg("equal_updates") = false);
}
