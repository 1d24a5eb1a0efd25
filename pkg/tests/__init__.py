"""Test suite for RAG Comparison package."""
