"""Graph-augmented generative extraction of an event's five Ws."""

from .backbone import Backbone, BackboneError, GenerationConfig, Tokenization, beam_search
from .config import ConfigError, RunConfig, config_from_dict, load_config, save_config
from .corpus import (AnnotatedDocument, Document, EventRecord, ParseError,
                     SchemaError, SlotClass, Span, TokenLabeling, align_labels,
                     build_closed_domain_input, load_corpus, parse_5w_string,
                     render_5w_string, split_corpus, write_corpus)
from .evalkit import (EvalReport, HashEmbedScorer, ScorerError, SlotScores,
                      embed_scores, evaluate_corpus, exact_match_scores,
                      rouge_l_scores)
from .fusion import GatedFusion, fuse_additive, gating_vector, integrate
from .graphnet import (FeatureCache, GraphEncoder, TokenGraph, Topology,
                       build_token_graph, encode_graph, init_node_features)
from .losses import (ContrastiveBatch, SkipBatch, contrastive_loss,
                     cross_entropy_loss, sample_contrastive_nodes)
from .model import (Ablation, EventModel, checkpoint_hash, derive_seed,
                    load_checkpoint, save_checkpoint)
from .synth import generate_corpus, generate_document
from .toy import ToyBackbone
from .training import make_optimizer_groups, run_training, training_step

__version__ = "0.1.0"
