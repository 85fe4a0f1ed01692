"""
Conditional vector-field network and classifier
"""
from funlora.models.classifier import ClassifierNet, classifier_eval, classifier_train
from funlora.models.vector_field import DenseLayer, TinyConvLayer, VectorFieldNet

__all__ = ["ClassifierNet", "DenseLayer", "TinyConvLayer", "VectorFieldNet", "classifier_eval", "classifier_train"]
