"""anyhop: any-hop open-domain question answering by iterative reranking."""
