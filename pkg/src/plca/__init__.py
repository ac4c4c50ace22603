"""Probabilistic Latent Component Analysis fitted by EM."""
from .em import FitConfig, FitTrace, Init, IterationRecord, Termination, em_step, fit, init_model
from .errors import (DomainError, ParseError, PlcaError, SchemaError, SearchSpaceTooLargeError,
                     ShapeError, ValidationError, VersionMismatchError)
from .model import PlcaModel, PosteriorTable, conditional_e_given_g, joint_prob, posterior
from .objective import EmpiricalDistribution, build_empirical, fobj, kld, q_function, sample_loglik
from .sampler import SampleCorpus, corpus_to_counts, sample_corpus, sample_pair

__version__ = "0.1.0"
