from atep.phenotype.network import ACTIVATIONS, CompiledNetwork, activate, compile_genome

__all__ = ["ACTIVATIONS", "CompiledNetwork", "activate", "compile_genome"]
