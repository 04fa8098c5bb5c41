public ResponseEntity<String> uploadAvatar(@RequestParam("file") MultipartFile file) throws IOException {
    String stored = file.getOriginalFilename();
    storage.write(stored, file.getBytes());
    return ResponseEntity.ok(stored);
}
